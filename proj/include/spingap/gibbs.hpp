#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "spingap/model.hpp"

namespace spingap {

// Real-valued observable over the free configurations of a context.
struct FunctionTable {
    SubsystemContext ctx;
    std::vector<double> values;
};

// Exact normalized conditional Gibbs measure. prob(cfg) is proportional to
// exp(+H) in the paper's convention; log_z is the log partition function.
struct GibbsTable {
    SubsystemContext ctx;
    std::vector<double> prob;
    double log_z = 0.0;
};

// All cavity fields of a subsystem: field[slot][cfg] = B_{free_sites[slot]}(cfg).
struct CavityTables {
    SubsystemContext ctx;
    std::vector<std::vector<double>> field;
};

constexpr std::size_t kDefaultTableBudget = std::size_t{1} << 20;

CavityTables cavity_tables(const ModelSpec& spec, const Disorder& dis,
                           const SubsystemContext& ctx,
                           std::size_t table_budget = kDefaultTableBudget);

GibbsTable gibbs_measure(const ModelSpec& spec, const Disorder& dis, const SubsystemContext& ctx,
                         std::size_t table_budget = kDefaultTableBudget);
GibbsTable gibbs_measure(const ModelSpec& spec, const Disorder& dis, const CavityTables& cavity);

// Convenience bundle; most exact computations need both tables.
struct Subsystem {
    SubsystemContext ctx;
    GibbsTable gibbs;
    CavityTables cavity;
};
Subsystem build_subsystem(const ModelSpec& spec, const Disorder& dis, const SubsystemContext& ctx,
                          std::size_t table_budget = kDefaultTableBudget);

double expectation(const GibbsTable& g, const FunctionTable& f);
double covariance(const GibbsTable& g, const FunctionTable& f1, const FunctionTable& f2);

FunctionTable constant_table(const SubsystemContext& ctx, double value);
FunctionTable site_spin_table(const SubsystemContext& ctx, int site);
/// Entries uniform in [-1, 1], keyed by (seed, stream).
FunctionTable random_table(const SubsystemContext& ctx, std::uint64_t seed, std::uint64_t stream);

/// (d_i f)(cfg) = (f(cfg) - f(cfg with spin i flipped)) / 2.
FunctionTable discrete_derivative(const FunctionTable& f, int site);

/// Restriction of f to the fiber where `site` is frozen at `sign`; the result
/// lives on f.ctx.freeze(site, sign).
FunctionTable restrict_to_fiber(const FunctionTable& f, int site, int sign);

/// Inverse of restrict_to_fiber on its image: extends a table on
/// parent.freeze(site, sign) to parent, constant across the site's fiber.
FunctionTable lift_from_frozen(const FunctionTable& sub, const SubsystemContext& parent, int site);

// Magnetizations m_i, covariance matrix M (with M_ii = 1 - m_i^2) and the
// diagonal weights lambda_i = 1 / (1 - m_i^2), indexed by free slot.
struct CorrelationMatrices {
    Eigen::VectorXd m;
    Eigen::MatrixXd M;
    Eigen::VectorXd lambda;
};
CorrelationMatrices correlation_matrices(const GibbsTable& g);

/// Covariances (<f; sigma_j>)_j for every free slot j.
Eigen::VectorXd spin_covariances(const GibbsTable& g, const FunctionTable& f);

// Both sides of the single-spin variance identity
// <f; f> = <f; sigma_j>^2 / (1 - m_j^2) for f depending only on sigma_j.
// Throws if f is not constant on the sigma_j fibers (tolerance 1e-12).
std::pair<double, double> single_spin_variance_identity(const GibbsTable& g,
                                                        const FunctionTable& f, int site);

/// Debugging dump: one line per configuration (index, spin signs, probability).
void dump_gibbs_csv(const GibbsTable& g, const std::filesystem::path& path);

}  // namespace spingap
