#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "spingap/gibbs.hpp"
#include "spingap/model.hpp"
#include "spingap/rng.hpp"

namespace spingap {

// Heat-bath Glauber chain over the free sites of a subsystem. Cavity fields
// and energy are maintained incrementally and resynced from scratch every
// resync_interval steps to kill float drift.
class Chain {
public:
    static constexpr std::size_t kDefaultResyncInterval = 100'000;

    Chain(const ModelSpec& spec, const Disorder& dis, SubsystemContext ctx,
          std::uint64_t stream, std::size_t resync_interval = kDefaultResyncInterval);

    // One update: pick a free site uniformly, resample it from its
    // conditional distribution, spin +1 with probability (1 + tanh B_j) / 2.
    void step();

    SpinWord config() const { return cfg_; }
    double energy() const { return energy_; }
    const std::vector<double>& cavity_fields() const { return cavity_; }
    const SubsystemContext& context() const { return ctx_; }
    std::size_t steps_taken() const { return steps_; }
    std::size_t flips() const { return flips_; }
    /// Mean spin over the free sites.
    double magnetization() const;

    /// Max |cached - recomputed| over the cavity fields.
    double cavity_drift() const;
    /// Recompute cached fields and energy from scratch.
    void resync();

private:
    const ModelSpec* spec_;
    const Disorder* dis_;
    SubsystemContext ctx_;
    std::vector<double> s_;       // merged sign vector, kept in step with cfg_
    std::vector<double> cavity_;  // per free slot
    SpinWord cfg_ = 0;
    double energy_ = 0.0;
    RandomStream rng_;
    std::size_t steps_ = 0;
    std::size_t flips_ = 0;
    std::size_t resync_interval_;
};

struct TrajectoryStats {
    std::vector<double> magnetization;  // one entry per sweep
    std::vector<double> energy;
    double tau_int_magnetization = 0.0;  // in sweeps
    double tau_int_energy = 0.0;
    double flip_fraction = 0.0;
    std::size_t n_sweeps = 0;
    int sweep_length = 0;  // N single-site updates
};

// Integrated autocorrelation time with the automatic window rule: smallest W
// with W >= 5 * tau_int(W). Throws std::invalid_argument when the series is
// too short for the rule.
double integrated_autocorrelation(std::span<const double> series);

TrajectoryStats estimate_relaxation(const ModelSpec& spec, const Disorder& dis,
                                    std::size_t steps, std::size_t burn_in,
                                    std::uint64_t stream = 0);

/// Discrete one-step kernel P = I + L / n_free; stationary for the Gibbs table.
Eigen::MatrixXd heat_bath_kernel(const GibbsTable& g, const CavityTables& cavity);

struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 0.0;
    std::size_t n_samples = 0;
    int n_bins = 0;  // after pooling low-expectation bins
};

// Goodness of fit of the chain's visited states against the exact Gibbs
// table. Samples are thinned (one per thin_sweeps sweeps) so the multinomial
// chi-square approximation applies; bins with expected count below 5 are
// pooled.
ChiSquareResult equilibrium_chi_square(const ModelSpec& spec, const Disorder& dis,
                                       const SubsystemContext& ctx, std::size_t total_steps,
                                       std::size_t burn_in, int thin_sweeps,
                                       std::uint64_t stream = 0);

}  // namespace spingap
