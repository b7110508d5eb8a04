#include "spingap/glauber.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spingap {

Chain::Chain(const ModelSpec& spec, const Disorder& dis, SubsystemContext ctx,
             std::uint64_t stream, std::size_t resync_interval)
    : spec_(&spec),
      dis_(&dis),
      ctx_(std::move(ctx)),
      rng_(derive_seed(spec.seed, 0x636861696eull, stream), 0),
      resync_interval_(resync_interval) {
    spec.validate();
    if (ctx_.n_free() < 1) throw std::invalid_argument("Chain: no free sites");
    cfg_ = 0;
    ctx_.signs(cfg_, s_);
    cavity_.resize(static_cast<std::size_t>(ctx_.n_free()));
    resync();
}

void Chain::resync() {
    ctx_.signs(cfg_, s_);
    for (int b = 0; b < ctx_.n_free(); ++b)
        cavity_[static_cast<std::size_t>(b)] =
            detail::cavity_field_s(*spec_, *dis_, ctx_.free_sites[static_cast<std::size_t>(b)],
                                   s_.data());
    energy_ = detail::hamiltonian_s(*spec_, *dis_, s_.data());
}

double Chain::cavity_drift() const {
    double drift = 0.0;
    for (int b = 0; b < ctx_.n_free(); ++b) {
        double exact = detail::cavity_field_s(
            *spec_, *dis_, ctx_.free_sites[static_cast<std::size_t>(b)], s_.data());
        drift = std::max(drift, std::abs(exact - cavity_[static_cast<std::size_t>(b)]));
    }
    return drift;
}

double Chain::magnetization() const {
    double total = 0.0;
    for (int b = 0; b < ctx_.n_free(); ++b) total += spin_of(cfg_, b);
    return total / ctx_.n_free();
}

void Chain::step() {
    const int n = ctx_.n_free();
    int slot = static_cast<int>(rng_.next_below(static_cast<std::uint32_t>(n)));
    double u = rng_.next_uniform();
    double p_plus = 0.5 * (1.0 + std::tanh(cavity_[static_cast<std::size_t>(slot)]));
    int next = u < p_plus ? +1 : -1;
    int current = spin_of(cfg_, slot);
    if (next != current) {
        int site = ctx_.free_sites[static_cast<std::size_t>(slot)];
        energy_ -= 2.0 * current * cavity_[static_cast<std::size_t>(slot)];
        // B_l picks up -2 sigma_j (partial_j B_l) from the flip at j.
        for (int b = 0; b < n; ++b) {
            if (b == slot) continue;
            cavity_[static_cast<std::size_t>(b)] -=
                2.0 * detail::cavity_derivative_s(
                          *spec_, *dis_, site, ctx_.free_sites[static_cast<std::size_t>(b)],
                          s_.data());
        }
        s_[static_cast<std::size_t>(site)] = next;
        cfg_ = flip_bit(cfg_, slot);
        ++flips_;
    }
    ++steps_;
    if (resync_interval_ > 0 && steps_ % resync_interval_ == 0) resync();
}

double integrated_autocorrelation(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 16) throw std::invalid_argument("integrated_autocorrelation: series too short");
    double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double x : series) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n);
    if (var == 0.0) return 0.5;  // constant series: instant decorrelation

    double tau = 0.5;
    for (std::size_t w = 1; w < n / 2; ++w) {
        double gamma = 0.0;
        for (std::size_t i = 0; i + w < n; ++i)
            gamma += (series[i] - mean) * (series[i + w] - mean);
        gamma /= static_cast<double>(n - w);
        tau += gamma / var;
        if (static_cast<double>(w) >= 5.0 * tau) return std::max(tau, 0.5);
    }
    throw std::invalid_argument(
        "integrated_autocorrelation: no window satisfied W >= 5 tau_int(W); series too short");
}

TrajectoryStats estimate_relaxation(const ModelSpec& spec, const Disorder& dis,
                                    std::size_t steps, std::size_t burn_in,
                                    std::uint64_t stream) {
    if (steps <= burn_in)
        throw std::invalid_argument("estimate_relaxation: steps must exceed burn_in");
    Chain chain(spec, dis, SubsystemContext::full(spec.n_spins), stream);
    for (std::size_t i = 0; i < burn_in; ++i) chain.step();

    const int n = spec.n_spins;
    TrajectoryStats stats;
    stats.sweep_length = n;
    std::size_t flips_before = chain.flips();
    std::size_t measure_steps = steps - burn_in;
    stats.n_sweeps = measure_steps / static_cast<std::size_t>(n);
    stats.magnetization.reserve(stats.n_sweeps);
    stats.energy.reserve(stats.n_sweeps);
    for (std::size_t sweep = 0; sweep < stats.n_sweeps; ++sweep) {
        for (int i = 0; i < n; ++i) chain.step();
        stats.magnetization.push_back(chain.magnetization());
        stats.energy.push_back(chain.energy());
    }
    stats.flip_fraction = static_cast<double>(chain.flips() - flips_before) /
                          static_cast<double>(stats.n_sweeps * static_cast<std::size_t>(n));
    stats.tau_int_magnetization = integrated_autocorrelation(stats.magnetization);
    stats.tau_int_energy = integrated_autocorrelation(stats.energy);
    return stats;
}

Eigen::MatrixXd heat_bath_kernel(const GibbsTable& g, const CavityTables& cavity) {
    const auto d = static_cast<Eigen::Index>(g.prob.size());
    const int n = g.ctx.n_free();
    Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t cfg = 0; cfg < g.prob.size(); ++cfg) {
        double stay = 1.0;
        for (int b = 0; b < n; ++b) {
            double sj = spin_of(static_cast<SpinWord>(cfg), b);
            double rate =
                0.5 * (1.0 - sj * std::tanh(cavity.field[static_cast<std::size_t>(b)][cfg]));
            double p = rate / n;
            kernel(static_cast<Eigen::Index>(cfg),
                   static_cast<Eigen::Index>(flip_bit(static_cast<SpinWord>(cfg), b))) = p;
            stay -= p;
        }
        kernel(static_cast<Eigen::Index>(cfg), static_cast<Eigen::Index>(cfg)) = stay;
    }
    return kernel;
}

ChiSquareResult equilibrium_chi_square(const ModelSpec& spec, const Disorder& dis,
                                       const SubsystemContext& ctx, std::size_t total_steps,
                                       std::size_t burn_in, int thin_sweeps,
                                       std::uint64_t stream) {
    GibbsTable exact = gibbs_measure(spec, dis, ctx);
    Chain chain(spec, dis, ctx, stream);
    for (std::size_t i = 0; i < burn_in; ++i) chain.step();

    const std::size_t thin = static_cast<std::size_t>(thin_sweeps) *
                             static_cast<std::size_t>(ctx.n_free());
    std::vector<std::size_t> counts(exact.prob.size(), 0);
    std::size_t n_samples = 0;
    std::size_t remaining = total_steps > burn_in ? total_steps - burn_in : 0;
    while (remaining >= thin) {
        for (std::size_t i = 0; i < thin; ++i) chain.step();
        remaining -= thin;
        ++counts[chain.config()];
        ++n_samples;
    }

    // Pool bins whose expected count falls below 5 so the chi-square
    // approximation is valid; configurations are pooled from the least
    // probable upward.
    std::vector<std::size_t> order(counts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return exact.prob[a] < exact.prob[b];
    });
    double pooled_expected = 0.0;
    double pooled_observed = 0.0;
    std::size_t pooled_bins = 0;
    double statistic = 0.0;
    int used_bins = 0;
    for (std::size_t idx : order) {
        double expected = exact.prob[idx] * static_cast<double>(n_samples);
        bool pool = expected < 5.0 || (pooled_bins > 0 && pooled_expected < 5.0);
        if (pool) {
            pooled_expected += expected;
            pooled_observed += static_cast<double>(counts[idx]);
            ++pooled_bins;
        } else {
            double diff = static_cast<double>(counts[idx]) - expected;
            statistic += diff * diff / expected;
            ++used_bins;
        }
    }
    if (pooled_bins > 0) {
        double diff = pooled_observed - pooled_expected;
        statistic += diff * diff / pooled_expected;
        ++used_bins;
    }
    if (used_bins < 2)
        throw std::runtime_error("equilibrium_chi_square: not enough samples for any bin");

    ChiSquareResult result;
    result.statistic = statistic;
    result.dof = used_bins - 1;
    result.n_samples = n_samples;
    result.n_bins = used_bins;
    boost::math::chi_squared dist(result.dof);
    result.p_value = boost::math::cdf(boost::math::complement(dist, statistic));
    return result;
}

}  // namespace spingap
