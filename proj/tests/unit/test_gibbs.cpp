#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "spingap/gibbs.hpp"
#include "spingap/model.hpp"
#include "spingap/rng.hpp"

using namespace spingap;

namespace {

ModelSpec make_spec(int n, std::vector<MixingTerm> mixing, std::vector<double> eta,
                    std::uint64_t seed = 1) {
    return ModelSpec{n, std::move(mixing), std::move(eta), seed};
}

// Naive normalization oracle in extended precision: direct exp/sum of the
// Hamiltonian over all configurations, no shift, no Gray walk.
std::vector<double> oracle_gibbs(const ModelSpec& spec, const Disorder& dis,
                                 const SubsystemContext& ctx) {
    std::vector<long double> weights(ctx.n_configs());
    long double z = 0.0L;
    for (std::size_t cfg = 0; cfg < weights.size(); ++cfg) {
        weights[cfg] = expl(static_cast<long double>(
            hamiltonian(spec, dis, ctx, static_cast<SpinWord>(cfg))));
        z += weights[cfg];
    }
    std::vector<double> prob(weights.size());
    for (std::size_t cfg = 0; cfg < weights.size(); ++cfg)
        prob[cfg] = static_cast<double>(weights[cfg] / z);
    return prob;
}

}  // namespace

TEST_SUITE("gibbs") {

TEST_CASE("uniform measure for zero couplings and fields") {
    ModelSpec spec = make_spec(4, {}, {0, 0, 0, 0});
    Disorder dis = sample_disorder(spec);
    GibbsTable g = gibbs_measure(spec, dis, SubsystemContext::full(4));
    for (double p : g.prob) CHECK(p == doctest::Approx(1.0 / 16).epsilon(1e-14));
    CHECK(g.log_z == doctest::Approx(std::log(16.0)).epsilon(1e-14));
}

TEST_CASE("single spin is the coin-toss measure (1 + tanh t)/2") {
    for (double t : {-2.0, -0.5, 0.0, 0.7, 3.0}) {
        ModelSpec spec = make_spec(1, {}, {t});
        Disorder dis = sample_disorder(spec);
        GibbsTable g = gibbs_measure(spec, dis, SubsystemContext::full(1));
        CHECK(g.prob[1] == doctest::Approx(0.5 * (1.0 + std::tanh(t))).epsilon(1e-14));
        CHECK(g.prob[0] == doctest::Approx(0.5 * (1.0 - std::tanh(t))).epsilon(1e-14));
    }
}

TEST_CASE("probabilities match the extended-precision oracle at N=6") {
    ModelSpec spec = make_spec(6, {{2, 0.4}, {3, 0.2}}, {0.3, -0.2, 0.1, 0.0, 0.5, -0.4}, 7);
    Disorder dis = sample_disorder(spec);
    for (const SubsystemContext& ctx :
         {SubsystemContext::full(6), SubsystemContext::make(6, {{1, -1}}, {4})}) {
        GibbsTable g = gibbs_measure(spec, dis, ctx);
        std::vector<double> expected = oracle_gibbs(spec, dis, ctx);
        double total = 0.0;
        for (std::size_t cfg = 0; cfg < expected.size(); ++cfg) {
            CHECK(g.prob[cfg] == doctest::Approx(expected[cfg]).epsilon(1e-12));
            CHECK(g.prob[cfg] > 0.0);
            total += g.prob[cfg];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("expectation and covariance basics") {
    ModelSpec spec = make_spec(3, {{2, 0.5}}, {0.1, -0.3, 0.2}, 19);
    Disorder dis = sample_disorder(spec);
    SubsystemContext ctx = SubsystemContext::full(3);
    GibbsTable g = gibbs_measure(spec, dis, ctx);

    FunctionTable c = constant_table(ctx, 3.5);
    CHECK(expectation(g, c) == doctest::Approx(3.5).epsilon(1e-14));
    FunctionTable f = random_table(ctx, 3, 0);
    CHECK(covariance(g, c, f) == doctest::Approx(0.0).epsilon(1e-14));

    // context mismatch must throw
    FunctionTable other = constant_table(SubsystemContext::full(2), 1.0);
    CHECK_THROWS_AS(expectation(g, other), std::invalid_argument);
}

TEST_CASE("uniform measure: <sigma_i> = 0, <sigma_i; sigma_i> = 1") {
    ModelSpec spec = make_spec(3, {}, {0, 0, 0});
    Disorder dis = sample_disorder(spec);
    GibbsTable g = gibbs_measure(spec, dis, SubsystemContext::full(3));
    FunctionTable s1 = site_spin_table(g.ctx, 1);
    CHECK(expectation(g, s1) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(covariance(g, s1, s1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("two-spin covariance matches the 4-term closed form") {
    ModelSpec spec = make_spec(2, {{2, 0.6}}, {0.2, -0.1}, 23);
    Disorder dis = sample_disorder(spec);
    SubsystemContext ctx = SubsystemContext::full(2);
    GibbsTable g = gibbs_measure(spec, dis, ctx);
    // hand-summed oracle over the four configurations
    double num_s0 = 0, num_s1 = 0, num_s01 = 0;
    for (SpinWord cfg = 0; cfg < 4; ++cfg) {
        double s0 = spin_of(cfg, 0), s1 = spin_of(cfg, 1);
        num_s0 += g.prob[cfg] * s0;
        num_s1 += g.prob[cfg] * s1;
        num_s01 += g.prob[cfg] * s0 * s1;
    }
    double expected = num_s01 - num_s0 * num_s1;
    CHECK(covariance(g, site_spin_table(ctx, 0), site_spin_table(ctx, 1)) ==
          doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("correlation matrices: uniform and single-spin cases") {
    ModelSpec spec = make_spec(3, {}, {0, 0, 0});
    Disorder dis = sample_disorder(spec);
    CorrelationMatrices corr = correlation_matrices(gibbs_measure(spec, dis,
                                                                  SubsystemContext::full(3)));
    CHECK(corr.m.norm() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK((corr.M - Eigen::MatrixXd::Identity(3, 3)).norm() ==
          doctest::Approx(0.0).epsilon(1e-13));
    CHECK((corr.lambda - Eigen::VectorXd::Ones(3)).norm() ==
          doctest::Approx(0.0).epsilon(1e-13));

    double t = 0.8;
    ModelSpec one = make_spec(1, {}, {t});
    Disorder done = sample_disorder(one);
    CorrelationMatrices c1 = correlation_matrices(gibbs_measure(one, done,
                                                                SubsystemContext::full(1)));
    double th = std::tanh(t);
    CHECK(c1.m(0) == doctest::Approx(th).epsilon(1e-13));
    CHECK(c1.M(0, 0) == doctest::Approx(1 - th * th).epsilon(1e-13));
    CHECK(c1.lambda(0) == doctest::Approx(1.0 / (1 - th * th)).epsilon(1e-13));
}

TEST_CASE("correlation matrix equals the outer-product oracle at N=5") {
    ModelSpec spec = make_spec(5, {{2, 0.5}, {3, 0.25}}, {0.1, -0.2, 0.3, 0.0, -0.1}, 29);
    Disorder dis = sample_disorder(spec);
    GibbsTable g = gibbs_measure(spec, dis, SubsystemContext::full(5));
    CorrelationMatrices corr = correlation_matrices(g);

    Eigen::VectorXd m = Eigen::VectorXd::Zero(5);
    for (SpinWord cfg = 0; cfg < 32; ++cfg)
        for (int b = 0; b < 5; ++b) m(b) += g.prob[cfg] * spin_of(cfg, b);
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(5, 5);
    for (SpinWord cfg = 0; cfg < 32; ++cfg) {
        Eigen::VectorXd d(5);
        for (int b = 0; b < 5; ++b) d(b) = spin_of(cfg, b) - m(b);
        outer += g.prob[cfg] * d * d.transpose();
    }
    CHECK((corr.M - outer).cwiseAbs().maxCoeff() <= 1e-12);
    for (int i = 0; i < 5; ++i)
        CHECK(corr.M(i, i) == doctest::Approx(1 - corr.m(i) * corr.m(i)).epsilon(1e-12));

    // PSD
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr.M, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues()(0) >= -1e-10);
}

TEST_CASE("m_j = <tanh B_j> and <cosh^-2 B_j> = 1 - <tanh^2 B_j>") {
    ModelSpec spec = make_spec(5, {{2, 0.7}, {4, 0.2}}, {0.4, -0.3, 0.2, 0.1, -0.5}, 37);
    Disorder dis = sample_disorder(spec);
    for (const SubsystemContext& ctx :
         {SubsystemContext::full(5), SubsystemContext::make(5, {{0, +1}}, {3})}) {
        Subsystem sub = build_subsystem(spec, dis, ctx);
        for (int b = 0; b < ctx.n_free(); ++b) {
            int site = ctx.free_sites[static_cast<std::size_t>(b)];
            double m = expectation(sub.gibbs, site_spin_table(ctx, site));
            double mean_tanh = 0, mean_tanh2 = 0, mean_sech2 = 0;
            for (std::size_t cfg = 0; cfg < sub.gibbs.prob.size(); ++cfg) {
                double bj = sub.cavity.field[static_cast<std::size_t>(b)][cfg];
                double t = std::tanh(bj);
                double ch = std::cosh(bj);
                mean_tanh += sub.gibbs.prob[cfg] * t;
                mean_tanh2 += sub.gibbs.prob[cfg] * t * t;
                mean_sech2 += sub.gibbs.prob[cfg] / (ch * ch);
            }
            CHECK(m == doctest::Approx(mean_tanh).epsilon(1e-12));
            CHECK(mean_sech2 == doctest::Approx(1.0 - mean_tanh2).epsilon(1e-12));
        }
    }
}

TEST_CASE("total variance formula over every free direction") {
    ModelSpec spec = make_spec(5, {{2, 0.6}, {3, 0.3}}, {0.2, -0.4, 0.1, 0.3, 0.0}, 43);
    Disorder dis = sample_disorder(spec);
    SubsystemContext ctx = SubsystemContext::make(5, {}, {1});
    GibbsTable g = gibbs_measure(spec, dis, ctx);
    FunctionTable f = random_table(ctx, 43, 9);
    double var = covariance(g, f, f);

    for (int site : ctx.free_sites) {
        // conditional variance and mean per fiber, lifted back
        FunctionTable cond_var{ctx, std::vector<double>(g.prob.size())};
        FunctionTable cond_mean{ctx, std::vector<double>(g.prob.size())};
        int bit = ctx.free_slot(site);
        for (int sign : {-1, +1}) {
            SubsystemContext frozen = ctx.freeze(site, sign);
            GibbsTable gf = gibbs_measure(spec, dis, frozen);
            FunctionTable ff = restrict_to_fiber(f, site, sign);
            double mv = expectation(gf, ff);
            double vv = covariance(gf, ff, ff);
            for (std::size_t sub_cfg = 0; sub_cfg < gf.prob.size(); ++sub_cfg) {
                SpinWord cfg = insert_bit(static_cast<SpinWord>(sub_cfg), bit, sign);
                cond_mean.values[cfg] = mv;
                cond_var.values[cfg] = vv;
            }
        }
        double total = expectation(g, cond_var) + covariance(g, cond_mean, cond_mean);
        CHECK(total == doctest::Approx(var).epsilon(1e-10));
    }
}

TEST_CASE("single-spin variance identity") {
    ModelSpec spec = make_spec(4, {{2, 0.8}}, {0.3, -0.2, 0.5, 0.1}, 53);
    Disorder dis = sample_disorder(spec);
    SubsystemContext ctx = SubsystemContext::full(4);
    GibbsTable g = gibbs_measure(spec, dis, ctx);

    // f = sigma_j: both sides equal 1 - m_j^2
    FunctionTable spin = site_spin_table(ctx, 2);
    auto [lhs_s, rhs_s] = single_spin_variance_identity(g, spin, 2);
    double m = expectation(g, spin);
    CHECK(lhs_s == doctest::Approx(1 - m * m).epsilon(1e-12));
    CHECK(rhs_s == doctest::Approx(lhs_s).epsilon(1e-12));

    // f constant: (0, 0)
    auto [lhs_c, rhs_c] = single_spin_variance_identity(g, constant_table(ctx, 2.0), 2);
    CHECK(lhs_c == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(rhs_c == doctest::Approx(0.0).epsilon(1e-14));

    // f = 3 sigma_j + 2
    FunctionTable affine = spin;
    for (double& v : affine.values) v = 3.0 * v + 2.0;
    auto [lhs_a, rhs_a] = single_spin_variance_identity(g, affine, 2);
    CHECK(lhs_a == doctest::Approx(rhs_a).epsilon(1e-12));

    // a table depending on another spin is rejected
    CHECK_THROWS_AS(single_spin_variance_identity(g, site_spin_table(ctx, 0), 2),
                    std::invalid_argument);
}

TEST_CASE("restrict/lift round-trip") {
    SubsystemContext ctx = SubsystemContext::full(4);
    FunctionTable f = random_table(ctx, 9, 1);
    for (int site : {0, 2, 3}) {
        for (int sign : {-1, +1}) {
            FunctionTable sub = restrict_to_fiber(f, site, sign);
            FunctionTable lifted = lift_from_frozen(sub, ctx, site);
            int bit = ctx.free_slot(site);
            for (SpinWord cfg = 0; cfg < 16; ++cfg)
                if (spin_of(cfg, bit) == sign) CHECK(lifted.values[cfg] == f.values[cfg]);
        }
    }
}

TEST_CASE("gibbs csv dump lists every configuration") {
    ModelSpec spec = make_spec(3, {}, {0.5, 0.0, -0.5});
    Disorder dis = sample_disorder(spec);
    GibbsTable g = gibbs_measure(spec, dis, SubsystemContext::full(3));
    auto path = std::filesystem::temp_directory_path() / "spingap_test_gibbs.csv";
    dump_gibbs_csv(g, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "index,spins,probability");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 8);
    std::filesystem::remove(path);
}

TEST_CASE("table budget is enforced") {
    ModelSpec spec = make_spec(8, {}, std::vector<double>(8, 0.0));
    Disorder dis = sample_disorder(spec);
    CHECK_THROWS_AS(gibbs_measure(spec, dis, SubsystemContext::full(8), 128), std::length_error);
}

}  // TEST_SUITE
