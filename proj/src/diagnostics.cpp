#include "spingap/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "spingap/rng.hpp"

namespace spingap {

namespace {

double sech2(double x) {
    double c = std::cosh(x);
    return 1.0 / (c * c);
}

InequalityReport make_report(std::string name, double lhs, double rhs, bool hypothesis_met,
                             bool asserted, double tol, const SubsystemContext& ctx,
                             bool two_sided = false) {
    InequalityReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = rhs - lhs;
    r.hypothesis_met = hypothesis_met;
    r.asserted = asserted;
    r.two_sided = two_sided;
    r.tol = tol;
    r.ctx = ctx.descriptor();
    return r;
}

}  // namespace

std::string report_json_line(const InequalityReport& report) {
    nlohmann::json j;
    j["name"] = report.name;
    j["ctx"] = report.ctx;
    j["lhs"] = report.lhs;
    j["rhs"] = report.rhs;
    j["slack"] = report.slack;
    j["hypothesis_met"] = report.hypothesis_met;
    j["asserted"] = report.asserted;
    j["two_sided"] = report.two_sided;
    j["tol"] = report.tol;
    if (!report.extra.empty()) j["extra"] = report.extra;
    return j.dump();
}

void write_reports_jsonl(const std::filesystem::path& path,
                         std::vector<InequalityReport> reports) {
    std::stable_sort(reports.begin(), reports.end(),
                     [](const InequalityReport& a, const InequalityReport& b) {
                         return std::tie(a.ctx, a.name) < std::tie(b.ctx, b.name);
                     });
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const auto& r : reports) out << report_json_line(r) << "\n";
}

void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<InequalityReport>& reports) {
    struct Row {
        std::size_t count = 0;
        double min_slack = std::numeric_limits<double>::infinity();
        std::size_t met = 0;
    };
    std::map<std::string, Row> rows;
    for (const auto& r : reports) {
        Row& row = rows[r.name];
        ++row.count;
        row.min_slack = std::min(row.min_slack, r.slack);
        if (r.hypothesis_met) ++row.met;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "name,count,min_slack,hypothesis_met_fraction\n";
    out.precision(17);
    for (const auto& [name, row] : rows)
        out << name << "," << row.count << "," << row.min_slack << ","
            << static_cast<double>(row.met) / static_cast<double>(row.count) << "\n";
}

double operator_norm(const Eigen::MatrixXd& a) {
    if (a.rows() == 0 || a.cols() == 0) return 0.0;
    Eigen::MatrixXd gram = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    double top = es.eigenvalues()(gram.rows() - 1);
    return std::sqrt(std::max(0.0, top));
}

CavityJacobian cavity_jacobian(const ModelSpec& spec, const Disorder& dis,
                               const SubsystemContext& ctx, SpinWord cfg) {
    const int n = ctx.n_free();
    CavityJacobian jac;
    jac.ctx = ctx;
    jac.config = cfg;
    jac.d = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> s = ctx.signs(cfg);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j)
                jac.d(i, j) = detail::cavity_derivative_s(spec, dis, ctx.free_sites[i],
                                                          ctx.free_sites[j], s.data());
    return jac;
}

namespace {
constexpr std::uint64_t kOmegaSampleTag = 0x6f6d6761u;
}

OmegaResult omega_check(const ModelSpec& spec, const Disorder& dis, OmegaMode mode,
                        std::size_t n_samples, int exact_max_n) {
    spec.validate();
    OmegaResult result;
    result.mode = mode;
    result.bound = 5.0 * beta_aggregate(spec);

    if (mode == OmegaMode::exact) {
        if (spec.n_spins > exact_max_n)
            throw std::length_error("omega_check: exact mode is cost-gated to N <= " +
                                    std::to_string(exact_max_n));
        double sup = 0.0;
        std::size_t count = 0;
        for (int k = 0; k < spec.n_spins; ++k) {
            for_each_subsystem(spec.n_spins, k, [&](const SubsystemContext& ctx) {
                for (std::size_t cfg = 0; cfg < ctx.n_configs(); ++cfg) {
                    CavityJacobian jac =
                        cavity_jacobian(spec, dis, ctx, static_cast<SpinWord>(cfg));
                    sup = std::max(sup, operator_norm(jac.d));
                    ++count;
                }
            });
        }
        result.observed_sup = sup;
        result.n_instances = count;
    } else {
        double sup = 0.0;
        for (std::size_t i = 0; i < n_samples; ++i) {
            RandomStream rs(derive_seed(spec.seed, kOmegaSampleTag, i), 0);
            int k = static_cast<int>(rs.next_below(static_cast<std::uint32_t>(spec.n_spins)));
            std::vector<int> pool(static_cast<std::size_t>(spec.n_spins));
            for (int s = 0; s < spec.n_spins; ++s) pool[static_cast<std::size_t>(s)] = s;
            std::vector<std::pair<int, int>> frozen;
            std::vector<int> removed;
            for (int s = 0; s < k; ++s) {
                std::uint32_t j = s + rs.next_below(static_cast<std::uint32_t>(spec.n_spins - s));
                std::swap(pool[static_cast<std::size_t>(s)], pool[j]);
                int site = pool[static_cast<std::size_t>(s)];
                std::uint64_t roll = rs.next_bits();
                if (roll & 1u)
                    frozen.emplace_back(site, (roll & 2u) ? +1 : -1);
                else
                    removed.push_back(site);
            }
            SubsystemContext ctx = SubsystemContext::make(spec.n_spins, frozen, removed);
            SpinWord cfg = static_cast<SpinWord>(rs.next_bits() &
                                                 ((std::uint64_t{1} << ctx.n_free()) - 1u));
            CavityJacobian jac = cavity_jacobian(spec, dis, ctx, cfg);
            sup = std::max(sup, operator_norm(jac.d));
        }
        result.observed_sup = sup;
        result.n_instances = n_samples;
    }
    result.holds = result.observed_sup <= result.bound;
    return result;
}

std::vector<InequalityReport> xq_iq_check(const CavityJacobian& jac, int q_max, double beta) {
    const int n = jac.ctx.n_free();
    const double bound1 = 5.0 * beta;
    const bool in_omega = operator_norm(jac.d) <= bound1;

    std::vector<InequalityReport> reports;
    double power = 1.0;
    for (int q = 1; q <= q_max; ++q) {
        power *= bound1;
        double iq = 0.0;
        for (int i = 0; i < n; ++i) {
            double row = 0.0, col = 0.0;
            for (int j = 0; j < n; ++j) {
                row += std::pow(std::abs(jac.d(i, j)), q);
                col += std::pow(std::abs(jac.d(j, i)), q);
            }
            iq = std::max({iq, row, col});
        }
        Eigen::MatrixXd xq(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) xq(i, j) = std::pow(jac.d(i, j), q);

        auto ir = make_report("iq_sum_q" + std::to_string(q), iq, power,
                              in_omega && q >= 2, true, 1e-12, jac.ctx);
        ir.extra["q"] = q;
        reports.push_back(std::move(ir));

        auto xr = make_report("xq_norm_q" + std::to_string(q), operator_norm(xq), power,
                              in_omega, true, 1e-12, jac.ctx);
        xr.extra["q"] = q;
        reports.push_back(std::move(xr));
    }
    return reports;
}

FunctionTable h_field(const GibbsTable& g, const CavityTables& cavity, int site) {
    int bit = g.ctx.free_slot(site);
    FunctionTable spin = site_spin_table(g.ctx, site);
    double m = expectation(g, spin);
    const auto& field = cavity.field[static_cast<std::size_t>(bit)];
    FunctionTable h{g.ctx, std::vector<double>(g.prob.size())};
    for (std::size_t cfg = 0; cfg < h.values.size(); ++cfg) {
        double s = spin.values[cfg];
        h.values[cfg] = (s - m) - std::exp(-2.0 * s * field[cfg]) * (s + m);
    }
    return h;
}

Eigen::MatrixXd s_matrix(const GibbsTable& g, const CavityTables& cavity) {
    const int n = g.ctx.n_free();
    std::vector<FunctionTable> h;
    h.reserve(static_cast<std::size_t>(n));
    Eigen::VectorXd scale(n);
    for (int b = 0; b < n; ++b) {
        int site = g.ctx.free_sites[static_cast<std::size_t>(b)];
        h.push_back(h_field(g, cavity, site));
        FunctionTable spin = site_spin_table(g.ctx, site);
        double m = expectation(g, spin);
        scale(b) = 1.0 / std::sqrt(1.0 - m * m);
    }
    Eigen::MatrixXd s(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double cov = covariance(g, h[static_cast<std::size_t>(i)],
                                    h[static_cast<std::size_t>(j)]);
            s(i, j) = s(j, i) = cov * scale(i) * scale(j);
        }
    }
    return s;
}

std::vector<InequalityReport> hjid_check(const Subsystem& sub, const FunctionTable& f) {
    std::vector<InequalityReport> reports;
    for (int site : sub.ctx.free_sites) {
        FunctionTable spin = site_spin_table(sub.ctx, site);
        double lhs = covariance(sub.gibbs, f, spin);
        double rhs = covariance(sub.gibbs, discrete_derivative(f, site), spin) +
                     0.5 * covariance(sub.gibbs, f, h_field(sub.gibbs, sub.cavity, site));
        auto r = make_report("hjid", lhs, rhs, true, true, 1e-10, sub.ctx, true);
        r.extra["site"] = site;
        reports.push_back(std::move(r));
    }
    return reports;
}

InequalityReport conditioning_lemma_check(const Subsystem& sub, const FunctionTable& f,
                                          double a_sub, bool a_sub_exact) {
    const int nf = sub.ctx.n_free();
    if (nf < 2)
        throw std::invalid_argument("conditioning_lemma_check: need at least two free sites");
    double lhs = covariance(sub.gibbs, f, f);
    double dform = dirichlet_form(sub.gibbs, sub.cavity, f);
    CorrelationMatrices corr = correlation_matrices(sub.gibbs);
    Eigen::VectorXd cov = spin_covariances(sub.gibbs, f);
    double error_term = 0.0;
    for (int b = 0; b < nf; ++b) error_term += cov(b) * cov(b) * corr.lambda(b);
    double rhs = (1.0 - 1.0 / nf) * a_sub * dform + error_term / nf;
    auto r = make_report("conditioning", lhs, rhs, a_sub_exact, true, 1e-9, sub.ctx);
    r.extra["a_sub"] = a_sub;
    r.extra["dirichlet"] = dform;
    return r;
}

std::vector<InequalityReport> indu_m_check(const Subsystem& sub, const FunctionTable& f,
                                           double a_this, double a_sub, bool a_sub_exact) {
    const int nf = sub.ctx.n_free();
    CorrelationMatrices corr = correlation_matrices(sub.gibbs);
    Eigen::VectorXd sqrt_lambda = corr.lambda.cwiseSqrt();
    Eigen::MatrixXd weighted = sqrt_lambda.asDiagonal() * corr.M * sqrt_lambda.asDiagonal();
    double norm = operator_norm(weighted);

    std::vector<InequalityReport> reports;

    double prefactor = 1.0 - norm / nf;
    auto iter = make_report("indu_m_iteration", prefactor * a_this, a_sub,
                            prefactor > 0.0 && a_sub_exact, true, 1e-9, sub.ctx);
    iter.extra["norm_lambda_m"] = norm;
    iter.extra["a_this"] = a_this;
    iter.extra["a_sub"] = a_sub;
    reports.push_back(std::move(iter));

    Eigen::VectorXd cov = spin_covariances(sub.gibbs, f);
    double lhs = 0.0;
    for (int b = 0; b < nf; ++b) lhs += cov(b) * cov(b) * corr.lambda(b);
    double variance = covariance(sub.gibbs, f, f);
    auto quad = make_report("indu_m_quadform", lhs, norm * variance, true, true, 1e-9, sub.ctx);
    quad.extra["norm_lambda_m"] = norm;
    reports.push_back(std::move(quad));
    return reports;
}

namespace {

// Scalar expectations of functions of B_j^{[A,B]} under the measure with j
// removed. B_j is independent of sigma_j, so its values on the reduced
// configurations are read off the parent cavity table at sigma_j = +1.
struct StarView {
    Subsystem star;
    std::vector<double> field;  // B_j^{[A,B]} on star configurations
    double a_star = 0.0;

    template <typename Fn>
    double mean(Fn&& fn) const {
        double acc = 0.0;
        for (std::size_t cfg = 0; cfg < star.gibbs.prob.size(); ++cfg)
            acc += star.gibbs.prob[cfg] * fn(field[cfg]);
        return acc;
    }
};

StarView make_star_view(const ModelSpec& spec, const Disorder& dis, const Subsystem& sub,
                        int site, const GapOptions& opts) {
    int bit = sub.ctx.free_slot(site);
    StarView view;
    view.star = build_subsystem(spec, dis, sub.ctx.remove(site), opts.eigen_budget);
    const auto& parent_field = sub.cavity.field[static_cast<std::size_t>(bit)];
    view.field.resize(view.star.gibbs.prob.size());
    for (std::size_t cfg = 0; cfg < view.field.size(); ++cfg)
        view.field[cfg] = parent_field[insert_bit(static_cast<SpinWord>(cfg), bit, +1)];
    view.a_star = inverse_spectral_gap(view.star.gibbs, view.star.cavity, opts).a;
    return view;
}

}  // namespace

std::vector<InequalityReport> bd_m_check(const ModelSpec& spec, const Disorder& dis,
                                         const Subsystem& sub, int site,
                                         std::span<const double> k_grid, double eps,
                                         bool omega_holds, const GapOptions& opts) {
    for (double k : k_grid)
        if (std::abs(k) > 20.0)
            throw std::invalid_argument("bd_m_check: K grid must lie in [-20, 20]");

    StarView view = make_star_view(spec, dis, sub, site, opts);
    double cb = c_beta(beta_aggregate(spec));
    bool hyp = omega_holds && view.a_star * cb < eps;

    FunctionTable spin = site_spin_table(sub.ctx, site);
    double m = expectation(sub.gibbs, spin);
    double one_minus_m2 = 1.0 - m * m;

    std::vector<InequalityReport> reports;
    auto annotate = [&](InequalityReport r, double k_value) {
        r.extra["K"] = k_value;
        r.extra["eps"] = eps;
        r.extra["a_star"] = view.a_star;
        r.extra["c_beta_a_star"] = cb * view.a_star;
        r.extra["site"] = site;
        reports.push_back(std::move(r));
    };

    double mean_cosh2 = view.mean([](double b) { return std::cosh(b) * std::cosh(b); });
    annotate(make_report("bd_m_1", 1.0 / mean_cosh2, (1.0 + 4.0 * eps) * one_minus_m2, hyp, true,
                         1e-9, sub.ctx),
             0.0);

    double mean_b = view.mean([](double b) { return b; });
    for (double k : k_grid) {
        double lhs2 = view.mean([&](double b) { return std::exp(-k * b); });
        annotate(make_report("bd_m_2", lhs2, (1.0 + 4.0 * eps) * std::exp(-k * mean_b), hyp, true,
                             1e-9, sub.ctx),
                 k);

        double ratio = view.mean([&](double b) { return std::cosh(k * b); }) /
                       std::cosh(k * mean_b);
        // Lower bound is Jensen's inequality: unconditional.
        annotate(make_report("bd_m_3_jensen", 1.0, ratio, true, true, 1e-9, sub.ctx), k);
        annotate(make_report("bd_m_3_upper", ratio, 1.0 + 4.0 * eps, hyp, true, 1e-9, sub.ctx), k);
    }
    return reports;
}

InequalityReport exp_moment_check(const ModelSpec& spec, const Disorder& dis,
                                  const Subsystem& sub, int site, double k_value, double eps,
                                  bool omega_holds, const GapOptions& opts) {
    StarView view = make_star_view(spec, dis, sub, site, opts);
    double ckb = c_k_beta(k_value, beta_aggregate(spec));
    bool hyp = omega_holds && ckb * view.a_star < eps;

    int bit = sub.ctx.free_slot(site);
    const auto& field = sub.cavity.field[static_cast<std::size_t>(bit)];
    double lhs = 0.0;
    for (std::size_t cfg = 0; cfg < sub.gibbs.prob.size(); ++cfg)
        lhs += sub.gibbs.prob[cfg] * std::exp(k_value * field[cfg]);
    double mean_b_star = view.mean([](double b) { return b; });
    double rhs = (1.0 + 4.0 * eps) * std::exp(k_value * mean_b_star);

    auto r = make_report("exp_moment", lhs, rhs, hyp, true, 1e-9, sub.ctx);
    r.extra["K"] = k_value;
    r.extra["eps"] = eps;
    r.extra["a_star"] = view.a_star;
    r.extra["c_k_beta_a_star"] = ckb * view.a_star;
    r.extra["site"] = site;
    return r;
}

InequalityReport lm41_check(const ModelSpec& spec, const Subsystem& sub, const FunctionTable& f,
                            double eps, double a_sub, bool omega_holds) {
    const int nf = sub.ctx.n_free();
    CorrelationMatrices corr = correlation_matrices(sub.gibbs);
    Eigen::VectorXd cov = spin_covariances(sub.gibbs, f);
    double lhs = 0.0;
    for (int b = 0; b < nf; ++b) lhs += cov(b) * cov(b) * corr.lambda(b);

    double dform = dirichlet_form(sub.gibbs, sub.cavity, f);
    double s_norm = operator_norm(s_matrix(sub.gibbs, sub.cavity));
    double variance = covariance(sub.gibbs, f, f);
    double rhs = std::pow(1.0 + 4.0 * eps, 5) * dform + s_norm * variance / (2.0 * eps);

    double cb = c_beta(beta_aggregate(spec));
    bool hyp = omega_holds && a_sub * cb < eps;
    auto r = make_report("lm41", lhs, rhs, hyp, true, 1e-9, sub.ctx);
    r.extra["eps"] = eps;
    r.extra["a_sub"] = a_sub;
    r.extra["s_norm"] = s_norm;
    r.extra["c_beta_a_sub"] = cb * a_sub;
    return r;
}

DichotomyResult dichotomy_check(const ModelSpec& spec, const Disorder& dis, int k, double eps,
                                bool omega_holds, const GapOptions& opts) {
    if (k < 0 || k > spec.n_spins - 2)
        throw std::invalid_argument("dichotomy_check: require 0 <= k <= N-2");
    DichotomyResult result;
    result.omega_holds = omega_holds;
    result.a_level = max_subsystem_gap(spec, dis, k, opts).a;
    result.a_sub_level = max_subsystem_gap(spec, dis, k + 1, opts).a;

    double max_s = 0.0;
    for_each_subsystem(spec.n_spins, k, [&](const SubsystemContext& ctx) {
        Subsystem sub = build_subsystem(spec, dis, ctx, opts.eigen_budget);
        max_s = std::max(max_s, operator_norm(s_matrix(sub.gibbs, sub.cavity)));
    });
    result.max_s_norm = max_s;

    const int nf = spec.n_spins - k;
    double rhs = (1.0 - 1.0 / nf) * result.a_sub_level + std::pow(1.0 + 4.0 * eps, 5) / nf;
    double cb = c_beta(beta_aggregate(spec));
    bool hyp = omega_holds && result.a_sub_level * cb < eps;
    result.core = make_report("dichotomy_core", result.a_level, rhs, hyp, false, 1e-9,
                              SubsystemContext::full(spec.n_spins));
    result.core.extra["k"] = k;
    result.core.extra["eps"] = eps;
    result.core.extra["a_level"] = result.a_level;
    result.core.extra["a_sub_level"] = result.a_sub_level;
    result.core.extra["max_s_norm"] = max_s;
    result.core.extra["omega"] = omega_holds ? 1.0 : 0.0;
    return result;
}

std::vector<ReplayStep> induction_replay(const ModelSpec& spec, const Disorder& dis, double eps,
                                         const GapOptions& opts) {
    spec.validate();
    const double band = 1.0 + 40.0 * std::pow(eps, 0.25);
    std::vector<ReplayStep> steps;
    double previous = 0.0;
    for (int k = spec.n_spins - 1; k >= 0; --k) {
        ReplayStep step;
        step.k = k;
        step.a = max_subsystem_gap(spec, dis, k, opts).a;
        step.within_band = step.a <= band;
        step.bounded_growth = k == spec.n_spins - 1 || step.a <= 5.0 * previous;
        previous = step.a;
        steps.push_back(step);
    }
    return steps;
}

std::vector<InequalityReport> identities_check(const Subsystem& sub) {
    std::vector<InequalityReport> reports;
    for (int site : sub.ctx.free_sites) {
        int bit = sub.ctx.free_slot(site);
        const auto& field = sub.cavity.field[static_cast<std::size_t>(bit)];
        FunctionTable spin = site_spin_table(sub.ctx, site);
        double m = expectation(sub.gibbs, spin);
        double mean_tanh = 0.0, mean_tanh2 = 0.0, mean_sech2 = 0.0;
        for (std::size_t cfg = 0; cfg < sub.gibbs.prob.size(); ++cfg) {
            double t = std::tanh(field[cfg]);
            mean_tanh += sub.gibbs.prob[cfg] * t;
            mean_tanh2 += sub.gibbs.prob[cfg] * t * t;
            mean_sech2 += sub.gibbs.prob[cfg] * sech2(field[cfg]);
        }
        auto r1 = make_report("m_tanh_identity", m, mean_tanh, true, true, 1e-12, sub.ctx, true);
        r1.extra["site"] = site;
        reports.push_back(std::move(r1));
        auto r2 = make_report("sech2_identity", mean_sech2, 1.0 - mean_tanh2, true, true, 1e-12,
                              sub.ctx, true);
        r2.extra["site"] = site;
        reports.push_back(std::move(r2));
        FunctionTable h = h_field(sub.gibbs, sub.cavity, site);
        auto r3 = make_report("h_mean_zero", expectation(sub.gibbs, h), 0.0, true, true, 1e-12,
                              sub.ctx, true);
        r3.extra["site"] = site;
        reports.push_back(std::move(r3));
    }
    return reports;
}

}  // namespace spingap
