#include "spingap/gap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "spingap/parallel.hpp"
#include "spingap/rng.hpp"

namespace spingap {

namespace {

void check_pair(const GibbsTable& g, const CavityTables& c) {
    if (!g.ctx.same_subsystem(c.ctx))
        throw std::invalid_argument("gibbs/cavity context mismatch");
}

double sech2(double x) {
    double c = std::cosh(x);
    return 1.0 / (c * c);
}

}  // namespace

double dirichlet_form(const GibbsTable& g, const CavityTables& cavity, const FunctionTable& f) {
    check_pair(g, cavity);
    if (!f.ctx.same_subsystem(g.ctx))
        throw std::invalid_argument("dirichlet_form: context mismatch");
    const int n = g.ctx.n_free();
    const std::size_t size = g.prob.size();
    double acc = 0.0;
    for (int b = 0; b < n; ++b) {
        const auto& field = cavity.field[static_cast<std::size_t>(b)];
        for (std::size_t cfg = 0; cfg < size; ++cfg) {
            double d = 0.5 * (f.values[cfg] - f.values[flip_bit(static_cast<SpinWord>(cfg), b)]);
            acc += g.prob[cfg] * sech2(field[cfg]) * d * d;
        }
    }
    return acc;
}

Eigen::MatrixXd covariance_form_matrix(const GibbsTable& g) {
    const auto d = static_cast<Eigen::Index>(g.prob.size());
    Eigen::Map<const Eigen::VectorXd> mu(g.prob.data(), d);
    Eigen::MatrixXd c = Eigen::MatrixXd(mu.asDiagonal());
    c.noalias() -= mu * mu.transpose();
    return c;
}

Eigen::MatrixXd dirichlet_form_matrix(const GibbsTable& g, const CavityTables& cavity) {
    check_pair(g, cavity);
    const auto d = static_cast<Eigen::Index>(g.prob.size());
    const int n = g.ctx.n_free();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(d, d);
    for (int b = 0; b < n; ++b) {
        const auto& field = cavity.field[static_cast<std::size_t>(b)];
        for (std::size_t cfg = 0; cfg < g.prob.size(); ++cfg) {
            std::size_t other = flip_bit(static_cast<SpinWord>(cfg), b);
            double w = 0.25 * g.prob[cfg] * sech2(field[cfg]);
            auto ci = static_cast<Eigen::Index>(cfg);
            auto co = static_cast<Eigen::Index>(other);
            k(ci, ci) += w;
            k(co, co) += w;
            k(ci, co) -= w;
            k(co, ci) -= w;
        }
    }
    return k;
}

namespace {

// Outer Householder reflection H = I - 2 u u^T chosen so that the columns
// 1..d-1 of H form an orthonormal basis of the mean-zero subspace mu^perp.
Eigen::VectorXd householder_vector(const Eigen::VectorXd& mu) {
    Eigen::VectorXd v = mu.normalized();
    v(0) += v(0) >= 0.0 ? 1.0 : -1.0;
    return v.normalized();
}

// A <- H A H, computed as a rank-2 update.
void reflect_both_sides(Eigen::MatrixXd& a, const Eigen::VectorXd& u) {
    Eigen::VectorXd w = a * u;
    double s = u.dot(w);
    a.noalias() -= 2.0 * u * w.transpose();
    a.noalias() -= 2.0 * w * u.transpose();
    a.noalias() += 4.0 * s * u * u.transpose();
}

}  // namespace

GapResult inverse_spectral_gap(const GibbsTable& g, const CavityTables& cavity,
                               const GapOptions& opts) {
    check_pair(g, cavity);
    const auto d = static_cast<Eigen::Index>(g.prob.size());
    if (g.prob.size() > opts.eigen_budget) {
        std::ostringstream msg;
        msg << "inverse_spectral_gap: table size " << g.prob.size() << " exceeds eigen budget "
            << opts.eigen_budget;
        throw std::length_error(msg.str());
    }

    Eigen::MatrixXd c = covariance_form_matrix(g);
    Eigen::MatrixXd k = dirichlet_form_matrix(g, cavity);

    Eigen::Map<const Eigen::VectorXd> mu(g.prob.data(), d);
    Eigen::VectorXd u = householder_vector(mu);

    Eigen::MatrixXd c_proj = c;
    Eigen::MatrixXd k_proj = k;
    reflect_both_sides(c_proj, u);
    reflect_both_sides(k_proj, u);
    Eigen::MatrixXd ct = c_proj.block(1, 1, d - 1, d - 1);
    Eigen::MatrixXd kt = k_proj.block(1, 1, d - 1, d - 1);

    // The Dirichlet form's kernel is exactly the constants, which are not in
    // the mean-zero subspace, so the projected form is positive definite.
    Eigen::LLT<Eigen::MatrixXd> llt(kt);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(
            "inverse_spectral_gap: Dirichlet form singular beyond the constant kernel");
    Eigen::MatrixXd lower = llt.matrixL();

    Eigen::MatrixXd tmp = lower.triangularView<Eigen::Lower>().solve(ct);
    Eigen::MatrixXd whitened =
        lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd(tmp.transpose()));
    whitened = 0.5 * (whitened + whitened.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(whitened);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("inverse_spectral_gap: eigensolver failed");
    double a = es.eigenvalues()(d - 2);
    Eigen::VectorXd y = es.eigenvectors().col(d - 2);

    auto build_witness = [&](const Eigen::VectorXd& yv) {
        Eigen::VectorXd xs = lower.transpose().triangularView<Eigen::Upper>().solve(yv);
        Eigen::VectorXd xf = Eigen::VectorXd::Zero(d);
        xf.tail(d - 1) = xs;
        Eigen::VectorXd w = xf - 2.0 * u * u.dot(xf);
        w.normalize();
        Eigen::Index imax;
        w.cwiseAbs().maxCoeff(&imax);
        if (w(imax) < 0.0) w = -w;
        return w;
    };

    Eigen::VectorXd w = build_witness(y);
    double residual = (c * w - a * (k * w)).norm();
    double rq = w.dot(c * w) / w.dot(k * w);

    // Rayleigh-quotient iteration on the whitened operator, rarely needed.
    for (int pass = 0; pass < 3 && (residual > opts.refine_threshold || std::abs(rq - a) > 1e-9);
         ++pass) {
        Eigen::MatrixXd shifted = whitened - a * Eigen::MatrixXd::Identity(d - 1, d - 1);
        Eigen::VectorXd z = shifted.ldlt().solve(y);
        if (!z.allFinite() || z.norm() == 0.0) break;
        y = z.normalized();
        a = y.dot(whitened * y);
        w = build_witness(y);
        residual = (c * w - a * (k * w)).norm();
        rq = w.dot(c * w) / w.dot(k * w);
    }

    GapResult result;
    result.a = a;
    result.residual = residual;
    result.witness.ctx = g.ctx;
    result.witness.values.assign(w.data(), w.data() + d);
    return result;
}

GapResult inverse_spectral_gap(const ModelSpec& spec, const Disorder& dis,
                               const SubsystemContext& ctx, const GapOptions& opts) {
    Subsystem sub = build_subsystem(spec, dis, ctx, opts.eigen_budget);
    return inverse_spectral_gap(sub.gibbs, sub.cavity, opts);
}

namespace {

struct InstanceDescriptor {
    std::vector<int> sites;      // the k sites of A u B
    std::uint32_t part_mask;     // bit set -> site goes to A
    std::uint32_t sign_mask;     // signs for the A sites, in order
};

SubsystemContext descriptor_to_context(const ModelSpec& spec, const InstanceDescriptor& inst) {
    std::vector<std::pair<int, int>> frozen;
    std::vector<int> removed;
    int a_rank = 0;
    for (std::size_t i = 0; i < inst.sites.size(); ++i) {
        if (inst.part_mask & (1u << i)) {
            int sign = (inst.sign_mask >> a_rank) & 1u ? +1 : -1;
            frozen.emplace_back(inst.sites[i], sign);
            ++a_rank;
        } else {
            removed.push_back(inst.sites[i]);
        }
    }
    return SubsystemContext::make(spec.n_spins, frozen, removed);
}

void enumerate_instances(int n, int k, std::vector<InstanceDescriptor>& out) {
    std::vector<int> comb(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) comb[static_cast<std::size_t>(i)] = i;
    while (true) {
        for (std::uint32_t part = 0; part < (1u << k); ++part) {
            int a_count = std::popcount(part);
            for (std::uint32_t sign = 0; sign < (1u << a_count); ++sign)
                out.push_back({comb, part, sign});
        }
        // next combination in lexicographic order
        int i = k - 1;
        while (i >= 0 && comb[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) break;
        ++comb[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j)
            comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
    }
}

constexpr std::uint64_t kMaxGapSampleTag = 0x6d617867u;  // sample-mode stream tag

InstanceDescriptor sample_instance(const ModelSpec& spec, int k, std::size_t index) {
    RandomStream rs(derive_seed(spec.seed, kMaxGapSampleTag, index), 0);
    std::vector<int> pool(static_cast<std::size_t>(spec.n_spins));
    for (int i = 0; i < spec.n_spins; ++i) pool[static_cast<std::size_t>(i)] = i;
    InstanceDescriptor inst;
    for (int i = 0; i < k; ++i) {
        std::uint32_t j = i + rs.next_below(static_cast<std::uint32_t>(spec.n_spins - i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        inst.sites.push_back(pool[static_cast<std::size_t>(i)]);
    }
    std::sort(inst.sites.begin(), inst.sites.end());
    inst.part_mask = k > 0 ? static_cast<std::uint32_t>(rs.next_bits() & ((1u << k) - 1u)) : 0u;
    int a_count = std::popcount(inst.part_mask);
    inst.sign_mask =
        a_count > 0 ? static_cast<std::uint32_t>(rs.next_bits() & ((1u << a_count) - 1u)) : 0u;
    return inst;
}

}  // namespace

MaxGapResult max_subsystem_gap(const ModelSpec& spec, const Disorder& dis, int k,
                               const GapOptions& opts) {
    spec.validate();
    if (k < 0 || k >= spec.n_spins)
        throw std::invalid_argument("max_subsystem_gap: require 0 <= k <= N-1");
    if ((std::size_t{1} << (spec.n_spins - k)) > opts.eigen_budget)
        throw std::length_error("max_subsystem_gap: subsystem tables exceed eigen budget");

    std::vector<InstanceDescriptor> instances;
    if (!opts.sample) {
        enumerate_instances(spec.n_spins, k, instances);
    } else {
        instances.reserve(opts.n_samples);
        for (std::size_t i = 0; i < opts.n_samples; ++i)
            instances.push_back(sample_instance(spec, k, i));
    }

    std::vector<double> values(instances.size());
    parallel_for(instances.size(), opts.threads, [&](std::size_t i) {
        SubsystemContext ctx = descriptor_to_context(spec, instances[i]);
        values[i] = inverse_spectral_gap(spec, dis, ctx, opts).a;
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;

    MaxGapResult result;
    result.a = values[best];
    result.argmax = descriptor_to_context(spec, instances[best]);
    result.exact = !opts.sample;
    result.n_instances = instances.size();
    return result;
}

Eigen::MatrixXd glauber_generator(const GibbsTable& g, const CavityTables& cavity) {
    check_pair(g, cavity);
    const auto d = static_cast<Eigen::Index>(g.prob.size());
    const int n = g.ctx.n_free();
    Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t cfg = 0; cfg < g.prob.size(); ++cfg) {
        double total = 0.0;
        for (int b = 0; b < n; ++b) {
            double sj = spin_of(static_cast<SpinWord>(cfg), b);
            double rate = 0.5 * (1.0 - sj * std::tanh(cavity.field[static_cast<std::size_t>(b)][cfg]));
            gen(static_cast<Eigen::Index>(cfg),
                static_cast<Eigen::Index>(flip_bit(static_cast<SpinWord>(cfg), b))) = rate;
            total += rate;
        }
        gen(static_cast<Eigen::Index>(cfg), static_cast<Eigen::Index>(cfg)) = -total;
    }
    return gen;
}

std::pair<double, double> generator_gap(const Eigen::MatrixXd& generator, const GibbsTable& g) {
    const auto d = static_cast<Eigen::Index>(g.prob.size());
    if (generator.rows() != d || generator.cols() != d)
        throw std::invalid_argument("generator_gap: dimension mismatch");
    Eigen::VectorXd sqrt_mu(d);
    for (Eigen::Index i = 0; i < d; ++i) sqrt_mu(i) = std::sqrt(g.prob[static_cast<std::size_t>(i)]);
    Eigen::MatrixXd sym(d, d);
    for (Eigen::Index x = 0; x < d; ++x)
        for (Eigen::Index y = 0; y < d; ++y)
            sym(x, y) = -generator(x, y) * sqrt_mu(x) / sqrt_mu(y);
    sym = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw std::runtime_error("generator_gap: eigensolver failed");
    double gap = es.eigenvalues()(1);
    return {gap, 1.0 / gap};
}

}  // namespace spingap
