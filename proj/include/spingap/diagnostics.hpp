#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spingap/gap.hpp"
#include "spingap/gibbs.hpp"
#include "spingap/model.hpp"

namespace spingap {

// One checked inequality (or identity). slack = rhs - lhs is recorded even
// when the hypothesis fails; `asserted` marks reports that participate in
// hard-assert gating whenever hypothesis_met is true.
struct InequalityReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    bool hypothesis_met = false;
    bool asserted = false;
    bool two_sided = false;  // identity: require |slack| <= tol instead of slack >= -tol
    double tol = 1e-9;
    std::string ctx;
    std::map<std::string, double> extra;

    bool violated() const {
        if (!hypothesis_met || !asserted) return false;
        return two_sided ? std::abs(slack) > tol : slack < -tol;
    }
};

/// JSON-lines output, one report per line, sorted by (ctx, name).
void write_reports_jsonl(const std::filesystem::path& path,
                         std::vector<InequalityReport> reports);
/// Summary CSV: name, count, min slack, hypothesis-met fraction.
void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<InequalityReport>& reports);
std::string report_json_line(const InequalityReport& report);

/// Largest singular value via a dense decomposition.
double operator_norm(const Eigen::MatrixXd& a);

// Matrix of discrete cavity-field derivatives at one configuration:
// d(i, j) = (partial_i B_j)(config). The diagonal vanishes because B_j does
// not depend on sigma_j.
struct CavityJacobian {
    SubsystemContext ctx;
    SpinWord config = 0;
    Eigen::MatrixXd d;
};
CavityJacobian cavity_jacobian(const ModelSpec& spec, const Disorder& dis,
                               const SubsystemContext& ctx, SpinWord cfg);

enum class OmegaMode { exact, sampled };
struct OmegaResult {
    bool holds = false;
    double observed_sup = 0.0;
    double bound = 0.0;  // 5 * beta
    OmegaMode mode = OmegaMode::sampled;
    std::size_t n_instances = 0;
};
// Sup of the jacobian operator norm over subsystems and configurations.
// Exact mode enumerates everything and is cost-gated to N <= exact_max_n;
// sampled mode draws (context, configuration) pairs keyed by the model seed.
OmegaResult omega_check(const ModelSpec& spec, const Disorder& dis, OmegaMode mode,
                        std::size_t n_samples = 256, int exact_max_n = 10);

// I_q row/column sums and the norms of the entrywise powers X_q against the
// (5 beta)^q bound, q = 1..q_max. The I_q bound requires q >= 2; the q = 1
// row is reported with hypothesis_met = false.
std::vector<InequalityReport> xq_iq_check(const CavityJacobian& jac, int q_max, double beta);

/// Mean-zero correction field h_j.
FunctionTable h_field(const GibbsTable& g, const CavityTables& cavity, int site);

/// Gram matrix of the normalized h fields; symmetric positive semi-definite.
Eigen::MatrixXd s_matrix(const GibbsTable& g, const CavityTables& cavity);

// Identity <f; sigma_j> = <d_j f; sigma_j> + <f; h_j> / 2, reported per free
// site as a two-sided check at 1e-10.
std::vector<InequalityReport> hjid_check(const Subsystem& sub, const FunctionTable& f);

// Variance bound through the maximal gap of the one-smaller subsystems;
// a_sub must be the exact a_{N-k-1} for the report to be asserted.
InequalityReport conditioning_lemma_check(const Subsystem& sub, const FunctionTable& f,
                                          double a_sub, bool a_sub_exact);

// Iteration inequality via the normalized correlation matrix plus the
// unconditional quadratic-form step on f.
std::vector<InequalityReport> indu_m_check(const Subsystem& sub, const FunctionTable& f,
                                           double a_this, double a_sub, bool a_sub_exact);

// Exponential-moment control of the cavity field under the measure with j
// removed; hypothesis: omega holds and a_{[A, B u {j}]} * C_beta < eps. The
// Jensen lower bound of the cosh ratio is asserted unconditionally.
std::vector<InequalityReport> bd_m_check(const ModelSpec& spec, const Disorder& dis,
                                         const Subsystem& sub, int site,
                                         std::span<const double> k_grid, double eps,
                                         bool omega_holds, const GapOptions& opts = {});

// Per-site identities: m_j = <tanh B_j>, <cosh^-2 B_j> = 1 - <tanh^2 B_j>,
// <h_j> = 0, all two-sided at 1e-12.
std::vector<InequalityReport> identities_check(const Subsystem& sub);

InequalityReport exp_moment_check(const ModelSpec& spec, const Disorder& dis,
                                  const Subsystem& sub, int site, double k_value, double eps,
                                  bool omega_holds, const GapOptions& opts = {});

// Error-term bound sum_j <sigma_j; f>^2 / (1 - m_j^2) <=
// (1+4 eps)^5 D(f) + ||S|| <f; f> / (2 eps).
InequalityReport lm41_check(const ModelSpec& spec, const Subsystem& sub, const FunctionTable& f,
                            double eps, double a_sub, bool omega_holds);

// Improved iteration inequality with the non-explicit constant term dropped
// (which strengthens the inequality), reported but never hard-asserted,
// together with the raw iteration quantities for offline analysis.
struct DichotomyResult {
    InequalityReport core;
    double a_level = 0.0;       // a_{N-k}
    double a_sub_level = 0.0;   // a_{N-k-1}
    double max_s_norm = 0.0;    // over the k-level subsystems
    bool omega_holds = false;
};
DichotomyResult dichotomy_check(const ModelSpec& spec, const Disorder& dis, int k, double eps,
                                bool omega_holds, const GapOptions& opts = {});

// Replays the size induction: a_{N-k} for k = N-1 down to 0, flagging at each
// step whether a <= 1 + 40 eps^{1/4} and whether a_{N-k} <= 5 a_{N-k-1}.
struct ReplayStep {
    int k = 0;
    double a = 0.0;
    bool within_band = false;
    bool bounded_growth = true;
};
std::vector<ReplayStep> induction_replay(const ModelSpec& spec, const Disorder& dis, double eps,
                                         const GapOptions& opts = {});

}  // namespace spingap
