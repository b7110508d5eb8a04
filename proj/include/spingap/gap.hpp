#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "spingap/gibbs.hpp"
#include "spingap/model.hpp"

namespace spingap {

struct GapOptions {
    std::size_t eigen_budget = std::size_t{1} << 12;  // largest table an eigensolve may touch
    double refine_threshold = 1e-8;                   // residual that triggers refinement
    int threads = 0;                                  // 0 = hardware
    // Sampling fallback for subsystem enumeration; results are lower bounds.
    bool sample = false;
    std::size_t n_samples = 4096;
};

// Inverse spectral gap with its maximizer. witness is unit-norm, mean zero
// under the subsystem measure, with its largest-magnitude entry positive.
struct GapResult {
    double a = 0.0;
    FunctionTable witness;
    double residual = 0.0;
};

/// Weighted Dirichlet form D(f); nonnegative, zero iff f is constant.
double dirichlet_form(const GibbsTable& g, const CavityTables& cavity, const FunctionTable& f);

/// Quadratic-form matrix of the covariance: diag(mu) - mu mu^T.
Eigen::MatrixXd covariance_form_matrix(const GibbsTable& g);
/// Quadratic-form matrix of the weighted Dirichlet form.
Eigen::MatrixXd dirichlet_form_matrix(const GibbsTable& g, const CavityTables& cavity);

// Largest generalized eigenvalue of (covariance, Dirichlet) restricted to the
// mean-zero subspace: projects both forms onto an orthonormal basis of that
// subspace, whitens by the Cholesky factor of the projected Dirichlet form and
// solves the resulting ordinary symmetric problem.
GapResult inverse_spectral_gap(const GibbsTable& g, const CavityTables& cavity,
                               const GapOptions& opts = {});
GapResult inverse_spectral_gap(const ModelSpec& spec, const Disorder& dis,
                               const SubsystemContext& ctx, const GapOptions& opts = {});

// Enumeration of every disjoint (A, B) with |A u B| = k and every sigma_A.
// Deterministic iteration order; ties in the max broken toward the first
// context in enumeration order, so results do not depend on thread count.
struct MaxGapResult {
    double a = 0.0;
    SubsystemContext argmax;
    bool exact = true;  // false in sampling mode: value is a lower bound
    std::size_t n_instances = 0;
};
MaxGapResult max_subsystem_gap(const ModelSpec& spec, const Disorder& dis, int k,
                               const GapOptions& opts = {});

// Heat-bath generator L with off-diagonal rate c_j(sigma) =
// (1 - sigma_j tanh B_j(sigma)) / 2 per site and -row-sum diagonal
// (continuous time, one attempted flip per site per unit time).
Eigen::MatrixXd glauber_generator(const GibbsTable& g, const CavityTables& cavity);

// Spectral gap of -L computed after symmetrizing by mu^{1/2} conjugation;
// returns (gap, 1/gap). 1/gap matches the variational inverse gap.
std::pair<double, double> generator_gap(const Eigen::MatrixXd& generator, const GibbsTable& g);

}  // namespace spingap
