#include <doctest.h>

#include <cmath>
#include <vector>

#include "spingap/gap.hpp"
#include "spingap/gibbs.hpp"
#include "spingap/model.hpp"
#include "spingap/rng.hpp"

using namespace spingap;

namespace {

ModelSpec make_spec(int n, std::vector<MixingTerm> mixing, std::vector<double> eta,
                    std::uint64_t seed = 1) {
    return ModelSpec{n, std::move(mixing), std::move(eta), seed};
}

// Generator-form oracle: (1/2) sum_sigma mu(sigma) sum_j c_j(sigma)
// (f(flip_j sigma) - f(sigma))^2 with heat-bath rates.
double oracle_generator_form(const ModelSpec& spec, const Disorder& dis,
                             const SubsystemContext& ctx, const GibbsTable& g,
                             const FunctionTable& f) {
    double acc = 0.0;
    for (std::size_t cfg = 0; cfg < g.prob.size(); ++cfg) {
        for (int b = 0; b < ctx.n_free(); ++b) {
            double sj = spin_of(static_cast<SpinWord>(cfg), b);
            double bj = cavity_field(spec, dis, ctx, ctx.free_sites[b],
                                     static_cast<SpinWord>(cfg));
            double rate = 0.5 * (1.0 - sj * std::tanh(bj));
            double diff = f.values[flip_bit(static_cast<SpinWord>(cfg), b)] - f.values[cfg];
            acc += 0.5 * g.prob[cfg] * rate * diff * diff;
        }
    }
    return acc;
}

// Random-restart coordinate-ascent maximization of Var(f) / D(f), independent
// of the eigensolver path.
double oracle_rayleigh_ascent(const GibbsTable& g, const CavityTables& cavity,
                              std::uint64_t seed, int restarts) {
    const std::size_t dim = g.prob.size();
    auto ratio = [&](const FunctionTable& f) {
        double var = covariance(g, f, f);
        double d = dirichlet_form(g, cavity, f);
        return d > 0 ? var / d : 0.0;
    };
    double best = 0.0;
    for (int r = 0; r < restarts; ++r) {
        FunctionTable f = random_table(g.ctx, seed, static_cast<std::uint64_t>(r));
        double current = ratio(f);
        for (int sweep = 0; sweep < 60; ++sweep) {
            for (std::size_t i = 0; i < dim; ++i) {
                // golden-section line search on coordinate i
                double lo = -3.0, hi = 3.0;
                const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
                auto eval = [&](double t) {
                    FunctionTable probe = f;
                    probe.values[i] += t;
                    return ratio(probe);
                };
                double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
                double f1 = eval(x1), f2 = eval(x2);
                for (int it = 0; it < 60; ++it) {
                    if (f1 < f2) {
                        lo = x1; x1 = x2; f1 = f2;
                        x2 = lo + phi * (hi - lo); f2 = eval(x2);
                    } else {
                        hi = x2; x2 = x1; f2 = f1;
                        x1 = hi - phi * (hi - lo); f1 = eval(x1);
                    }
                }
                double t = 0.5 * (lo + hi);
                FunctionTable probe = f;
                probe.values[i] += t;
                double v = ratio(probe);
                if (v > current) {
                    f = probe;
                    current = v;
                }
            }
        }
        best = std::max(best, current);
    }
    return best;
}

}  // namespace

TEST_SUITE("gap") {

TEST_CASE("dirichlet form: constants give zero, nonconstants do not") {
    ModelSpec spec = make_spec(4, {{2, 0.5}}, {0.1, -0.2, 0.3, 0.0}, 3);
    Disorder dis = sample_disorder(spec);
    Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(4));
    CHECK(dirichlet_form(sub.gibbs, sub.cavity, constant_table(sub.ctx, 7.0)) ==
          doctest::Approx(0.0).epsilon(1e-15));
    FunctionTable f = random_table(sub.ctx, 5, 0);
    CHECK(dirichlet_form(sub.gibbs, sub.cavity, f) > 0.0);
}

TEST_CASE("dirichlet form: zero disorder, zero field, f = sigma_j gives 1") {
    ModelSpec spec = make_spec(4, {}, {0, 0, 0, 0});
    Disorder dis = sample_disorder(spec);
    Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(4));
    CHECK(dirichlet_form(sub.gibbs, sub.cavity, site_spin_table(sub.ctx, 2)) ==
          doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("heat-bath rate identity mu c_j = (mu + mu_flip) sech^2 / 4") {
    ModelSpec spec = make_spec(5, {{2, 0.6}, {3, 0.3}}, {0.2, -0.1, 0.4, 0.0, -0.3}, 7);
    Disorder dis = sample_disorder(spec);
    SubsystemContext ctx = SubsystemContext::make(5, {{4, +1}}, {});
    Subsystem sub = build_subsystem(spec, dis, ctx);
    for (std::size_t cfg = 0; cfg < sub.gibbs.prob.size(); ++cfg) {
        for (int b = 0; b < ctx.n_free(); ++b) {
            double sj = spin_of(static_cast<SpinWord>(cfg), b);
            double bj = sub.cavity.field[b][cfg];
            double rate = 0.5 * (1.0 - sj * std::tanh(bj));
            double lhs = sub.gibbs.prob[cfg] * rate;
            double mu_flip = sub.gibbs.prob[flip_bit(static_cast<SpinWord>(cfg), b)];
            double ch = std::cosh(bj);
            double rhs = (sub.gibbs.prob[cfg] + mu_flip) / (ch * ch) / 4.0;
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("dirichlet form equals the generator-form oracle") {
    ModelSpec spec = make_spec(5, {{2, 0.7}, {3, 0.2}}, {0.3, -0.2, 0.1, 0.4, 0.0}, 11);
    Disorder dis = sample_disorder(spec);
    SubsystemContext ctx = SubsystemContext::make(5, {}, {2});
    Subsystem sub = build_subsystem(spec, dis, ctx);
    for (int i = 0; i < 5; ++i) {
        FunctionTable f = random_table(ctx, 100 + static_cast<std::uint64_t>(i), 0);
        double d = dirichlet_form(sub.gibbs, sub.cavity, f);
        double oracle = oracle_generator_form(spec, dis, ctx, sub.gibbs, f);
        CHECK(d == doctest::Approx(oracle).epsilon(1e-10));
    }
}

TEST_CASE("weights cosh^-2 <= 1: weighted form below the unweighted one") {
    ModelSpec spec = make_spec(4, {{2, 0.9}}, {0.5, -0.4, 0.3, -0.2}, 13);
    Disorder dis = sample_disorder(spec);
    Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(4));
    for (int i = 0; i < 5; ++i) {
        FunctionTable f = random_table(sub.ctx, 200 + static_cast<std::uint64_t>(i), 0);
        double weighted = dirichlet_form(sub.gibbs, sub.cavity, f);
        double unweighted = 0.0;
        for (int site : sub.ctx.free_sites) {
            FunctionTable df = discrete_derivative(f, site);
            for (std::size_t cfg = 0; cfg < sub.gibbs.prob.size(); ++cfg)
                unweighted += sub.gibbs.prob[cfg] * df.values[cfg] * df.values[cfg];
        }
        CHECK(weighted <= unweighted + 1e-12);
    }
}

TEST_CASE("single free spin: a = 1 for any field") {
    for (double t : {-2.5, -0.3, 0.0, 0.9, 3.0}) {
        ModelSpec spec = make_spec(1, {}, {t});
        Disorder dis = sample_disorder(spec);
        GapResult r = inverse_spectral_gap(spec, dis, SubsystemContext::full(1));
        CHECK(std::abs(r.a - 1.0) <= 1e-12);
    }
}

TEST_CASE("zero disorder: product measure has a = 1 and clean witness") {
    ModelSpec spec = make_spec(6, {}, {0.4, -0.7, 0.2, 0.0, 1.1, -0.3});
    Disorder dis = sample_disorder(spec);
    Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(6));
    GapResult r = inverse_spectral_gap(sub.gibbs, sub.cavity);
    CHECK(std::abs(r.a - 1.0) <= 1e-9);
    CHECK(r.residual <= 1e-8);

    // witness: unit norm, mean zero, positive leading entry, Rayleigh match
    double norm = 0.0, mean = 0.0;
    for (std::size_t cfg = 0; cfg < r.witness.values.size(); ++cfg) {
        norm += r.witness.values[cfg] * r.witness.values[cfg];
        mean += sub.gibbs.prob[cfg] * r.witness.values[cfg];
    }
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(mean) <= 1e-10);
    double max_abs = 0.0, max_val = 0.0;
    for (double v : r.witness.values)
        if (std::abs(v) > max_abs) {
            max_abs = std::abs(v);
            max_val = v;
        }
    CHECK(max_val > 0.0);
    double rq = covariance(sub.gibbs, r.witness, r.witness) /
                dirichlet_form(sub.gibbs, sub.cavity, r.witness);
    CHECK(std::abs(rq - r.a) <= 1e-9);
}

TEST_CASE("N=2 gap matches the random-restart Rayleigh ascent oracle") {
    ModelSpec spec = make_spec(2, {{2, 0.8}}, {0.3, -0.2}, 17);
    Disorder dis = sample_disorder(spec);
    Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(2));
    GapResult r = inverse_spectral_gap(sub.gibbs, sub.cavity);
    double oracle = oracle_rayleigh_ascent(sub.gibbs, sub.cavity, 23, 20);
    CHECK(r.a == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("linear functions: <c, M c> <= a * D(sum c_j sigma_j)") {
    ModelSpec spec = make_spec(5, {{2, 0.5}}, {0.2, -0.3, 0.1, 0.0, 0.4}, 19);
    Disorder dis = sample_disorder(spec);
    Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(5));
    GapResult r = inverse_spectral_gap(sub.gibbs, sub.cavity);
    CorrelationMatrices corr = correlation_matrices(sub.gibbs);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd c(5);
        for (int i = 0; i < 5; ++i)
            c(i) = 2.0 * uniform_at(777, static_cast<std::uint64_t>(trial), i) - 1.0;
        FunctionTable f = constant_table(sub.ctx, 0.0);
        for (std::size_t cfg = 0; cfg < f.values.size(); ++cfg)
            for (int b = 0; b < 5; ++b)
                f.values[cfg] += c(b) * spin_of(static_cast<SpinWord>(cfg), b);
        double quad = c.dot(corr.M * c);
        double d = dirichlet_form(sub.gibbs, sub.cavity, f);
        CHECK(quad <= r.a * d + 1e-10);
        // and the quadratic form matches the covariance of the linear function
        CHECK(quad == doctest::Approx(covariance(sub.gibbs, f, f)).epsilon(1e-11));
    }
}

TEST_CASE("glauber generator: single-spin rates and unit gap") {
    double t = 0.6;
    ModelSpec spec = make_spec(1, {}, {t});
    Disorder dis = sample_disorder(spec);
    Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(1));
    Eigen::MatrixXd gen = glauber_generator(sub.gibbs, sub.cavity);
    // config 0 is spin -1: flips up with rate (1 + tanh t)/2
    CHECK(gen(0, 1) == doctest::Approx(0.5 * (1 + std::tanh(t))).epsilon(1e-14));
    CHECK(gen(1, 0) == doctest::Approx(0.5 * (1 - std::tanh(t))).epsilon(1e-14));
    auto [gap_value, inv] = generator_gap(gen, sub.gibbs);
    CHECK(gap_value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(inv == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("glauber generator: uniform N=2 eigenvalues and detailed balance") {
    ModelSpec spec = make_spec(2, {}, {0, 0});
    Disorder dis = sample_disorder(spec);
    Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(2));
    Eigen::MatrixXd gen = glauber_generator(sub.gibbs, sub.cavity);
    // -L has eigenvalues {0, 1, 1, 2} for two independent unit-rate spins
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-gen);
    CHECK(es.eigenvalues()(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(es.eigenvalues()(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(es.eigenvalues()(3) == doctest::Approx(2.0).epsilon(1e-12));
    auto [gap_value, inv] = generator_gap(gen, sub.gibbs);
    CHECK(inv == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("detailed balance of the generator on a random instance") {
    ModelSpec spec = make_spec(4, {{2, 0.8}, {3, 0.4}}, {0.3, -0.5, 0.2, 0.1}, 29);
    Disorder dis = sample_disorder(spec);
    Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(4));
    Eigen::MatrixXd gen = glauber_generator(sub.gibbs, sub.cavity);
    for (std::size_t cfg = 0; cfg < 16; ++cfg)
        for (int b = 0; b < 4; ++b) {
            std::size_t other = flip_bit(static_cast<SpinWord>(cfg), b);
            double lhs = sub.gibbs.prob[cfg] * gen(cfg, other);
            double rhs = sub.gibbs.prob[other] * gen(other, cfg);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
}

TEST_CASE("dual path: variational a equals 1/gap(-L)") {
    for (std::uint64_t seed : {31ull, 32ull, 33ull}) {
        ModelSpec spec = make_spec(4, {{2, 0.5}, {3, 0.25}}, {0.2, -0.1, 0.3, 0.0}, seed);
        Disorder dis = sample_disorder(spec);
        Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(4));
        GapResult var = inverse_spectral_gap(sub.gibbs, sub.cavity);
        auto [gap_value, inv] = generator_gap(glauber_generator(sub.gibbs, sub.cavity),
                                              sub.gibbs);
        CHECK(std::abs(var.a - inv) <= 1e-8);
    }
}

TEST_CASE("max subsystem gap: k = N-1 gives exactly 1") {
    ModelSpec spec = make_spec(4, {{2, 0.7}}, {0.4, -0.2, 0.1, 0.3}, 37);
    Disorder dis = sample_disorder(spec);
    MaxGapResult r = max_subsystem_gap(spec, dis, 3);
    CHECK(std::abs(r.a - 1.0) <= 1e-12);
    CHECK(r.exact);
    CHECK(r.n_instances == count_subsystems(4, 3));
}

TEST_CASE("max subsystem gap: k = 0 is the single full-system instance") {
    ModelSpec spec = make_spec(4, {{2, 0.6}}, {0.1, 0.2, -0.3, 0.0}, 41);
    Disorder dis = sample_disorder(spec);
    MaxGapResult r = max_subsystem_gap(spec, dis, 0);
    CHECK(r.n_instances == 1);
    GapResult direct = inverse_spectral_gap(spec, dis, SubsystemContext::full(4));
    CHECK(r.a == doctest::Approx(direct.a).epsilon(1e-12));
}

TEST_CASE("zero disorder: a_{N-k} = 1 for every k") {
    ModelSpec spec = make_spec(5, {}, {0.3, -0.6, 0.2, 0.8, -0.1});
    Disorder dis = sample_disorder(spec);
    for (int k = 0; k < 5; ++k) {
        MaxGapResult r = max_subsystem_gap(spec, dis, k);
        CHECK(std::abs(r.a - 1.0) <= 1e-9);
    }
}

TEST_CASE("sampling mode flags a lower bound") {
    ModelSpec spec = make_spec(5, {{2, 0.5}}, {0.1, -0.2, 0.3, 0.0, 0.2}, 43);
    Disorder dis = sample_disorder(spec);
    MaxGapResult exact = max_subsystem_gap(spec, dis, 2);
    GapOptions opts;
    opts.sample = true;
    opts.n_samples = 32;
    MaxGapResult sampled = max_subsystem_gap(spec, dis, 2, opts);
    CHECK_FALSE(sampled.exact);
    CHECK(sampled.a <= exact.a + 1e-12);
    // deterministic across repeated runs
    MaxGapResult sampled2 = max_subsystem_gap(spec, dis, 2, opts);
    CHECK(sampled.a == sampled2.a);
}

TEST_CASE("thread count does not change the enumerated maximum") {
    ModelSpec spec = make_spec(5, {{2, 0.6}}, {0.2, -0.1, 0.0, 0.3, -0.4}, 47);
    Disorder dis = sample_disorder(spec);
    GapOptions one;
    one.threads = 1;
    GapOptions many;
    many.threads = 8;
    MaxGapResult r1 = max_subsystem_gap(spec, dis, 2, one);
    MaxGapResult r8 = max_subsystem_gap(spec, dis, 2, many);
    CHECK(r1.a == r8.a);
    CHECK(r1.argmax.descriptor() == r8.argmax.descriptor());
}

TEST_CASE("eigen budget is enforced") {
    ModelSpec spec = make_spec(8, {}, std::vector<double>(8, 0.0));
    Disorder dis = sample_disorder(spec);
    GapOptions opts;
    opts.eigen_budget = 64;
    CHECK_THROWS_AS(inverse_spectral_gap(spec, dis, SubsystemContext::full(8), opts),
                    std::length_error);
}

}  // TEST_SUITE
