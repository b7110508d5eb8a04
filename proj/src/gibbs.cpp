#include "spingap/gibbs.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "spingap/rng.hpp"

namespace spingap {

namespace {

void check_budget(const SubsystemContext& ctx, std::size_t budget) {
    if (ctx.n_free() < 1)
        throw std::invalid_argument("subsystem has no free sites");
    if (ctx.n_configs() > budget) {
        std::ostringstream msg;
        msg << "table of size 2^" << ctx.n_free() << " exceeds budget " << budget;
        throw std::length_error(msg.str());
    }
}

void check_ctx(const FunctionTable& f, const GibbsTable& g) {
    if (!f.ctx.same_subsystem(g.ctx) || f.values.size() != g.prob.size())
        throw std::invalid_argument("context mismatch between table and measure");
}

}  // namespace

CavityTables cavity_tables(const ModelSpec& spec, const Disorder& dis,
                           const SubsystemContext& ctx, std::size_t table_budget) {
    spec.validate();
    check_budget(ctx, table_budget);
    const int n = ctx.n_free();
    const std::size_t size = ctx.n_configs();
    CavityTables out;
    out.ctx = ctx;
    out.field.assign(static_cast<std::size_t>(n), std::vector<double>(size));
    std::vector<double> s;
    for (std::size_t cfg = 0; cfg < size; ++cfg) {
        ctx.signs(static_cast<SpinWord>(cfg), s);
        for (int b = 0; b < n; ++b)
            out.field[static_cast<std::size_t>(b)][cfg] =
                detail::cavity_field_s(spec, dis, ctx.free_sites[static_cast<std::size_t>(b)],
                                       s.data());
    }
    return out;
}

GibbsTable gibbs_measure(const ModelSpec& spec, const Disorder& dis, const CavityTables& cavity) {
    const SubsystemContext& ctx = cavity.ctx;
    const std::size_t size = ctx.n_configs();

    // Energies via a Gray-code walk: one spin flip per step costs a single
    // cavity-field lookup, H(flip_j sigma) = H(sigma) - 2 sigma_j B_j(sigma).
    std::vector<double> energy(size);
    energy[0] = hamiltonian(spec, dis, ctx, 0);
    SpinWord prev = 0;
    for (std::size_t t = 1; t < size; ++t) {
        int bit = std::countr_zero(t);
        SpinWord cur = static_cast<SpinWord>(t ^ (t >> 1));
        double sj = spin_of(prev, bit);
        energy[cur] = energy[prev] - 2.0 * sj * cavity.field[static_cast<std::size_t>(bit)][prev];
        prev = cur;
    }

    double max_h = *std::max_element(energy.begin(), energy.end());
    GibbsTable g;
    g.ctx = ctx;
    g.prob.resize(size);
    double z_shifted = 0.0;
    for (std::size_t cfg = 0; cfg < size; ++cfg) {
        g.prob[cfg] = std::exp(energy[cfg] - max_h);
        z_shifted += g.prob[cfg];
    }
    for (std::size_t cfg = 0; cfg < size; ++cfg) g.prob[cfg] /= z_shifted;
    g.log_z = max_h + std::log(z_shifted);
    return g;
}

GibbsTable gibbs_measure(const ModelSpec& spec, const Disorder& dis, const SubsystemContext& ctx,
                         std::size_t table_budget) {
    return gibbs_measure(spec, dis, cavity_tables(spec, dis, ctx, table_budget));
}

Subsystem build_subsystem(const ModelSpec& spec, const Disorder& dis, const SubsystemContext& ctx,
                          std::size_t table_budget) {
    Subsystem sub;
    sub.ctx = ctx;
    sub.cavity = cavity_tables(spec, dis, ctx, table_budget);
    sub.gibbs = gibbs_measure(spec, dis, sub.cavity);
    return sub;
}

double expectation(const GibbsTable& g, const FunctionTable& f) {
    check_ctx(f, g);
    double acc = 0.0;
    for (std::size_t cfg = 0; cfg < g.prob.size(); ++cfg) acc += g.prob[cfg] * f.values[cfg];
    return acc;
}

double covariance(const GibbsTable& g, const FunctionTable& f1, const FunctionTable& f2) {
    check_ctx(f1, g);
    check_ctx(f2, g);
    double m1 = expectation(g, f1);
    double m2 = expectation(g, f2);
    double acc = 0.0;
    for (std::size_t cfg = 0; cfg < g.prob.size(); ++cfg)
        acc += g.prob[cfg] * (f1.values[cfg] - m1) * (f2.values[cfg] - m2);
    return acc;
}

FunctionTable constant_table(const SubsystemContext& ctx, double value) {
    return {ctx, std::vector<double>(ctx.n_configs(), value)};
}

FunctionTable site_spin_table(const SubsystemContext& ctx, int site) {
    int bit = ctx.free_slot(site);
    FunctionTable f{ctx, std::vector<double>(ctx.n_configs())};
    for (std::size_t cfg = 0; cfg < f.values.size(); ++cfg)
        f.values[cfg] = spin_of(static_cast<SpinWord>(cfg), bit);
    return f;
}

FunctionTable random_table(const SubsystemContext& ctx, std::uint64_t seed, std::uint64_t stream) {
    FunctionTable f{ctx, std::vector<double>(ctx.n_configs())};
    for (std::size_t cfg = 0; cfg < f.values.size(); ++cfg)
        f.values[cfg] = 2.0 * uniform_at(seed, stream, cfg) - 1.0;
    return f;
}

FunctionTable discrete_derivative(const FunctionTable& f, int site) {
    int bit = f.ctx.free_slot(site);
    FunctionTable out{f.ctx, std::vector<double>(f.values.size())};
    for (std::size_t cfg = 0; cfg < f.values.size(); ++cfg)
        out.values[cfg] =
            0.5 * (f.values[cfg] - f.values[flip_bit(static_cast<SpinWord>(cfg), bit)]);
    return out;
}

FunctionTable restrict_to_fiber(const FunctionTable& f, int site, int sign) {
    int bit = f.ctx.free_slot(site);
    FunctionTable out{f.ctx.freeze(site, sign), {}};
    out.values.resize(f.values.size() / 2);
    for (std::size_t sub = 0; sub < out.values.size(); ++sub)
        out.values[sub] = f.values[insert_bit(static_cast<SpinWord>(sub), bit, sign)];
    return out;
}

FunctionTable lift_from_frozen(const FunctionTable& sub, const SubsystemContext& parent,
                               int site) {
    int bit = parent.free_slot(site);
    FunctionTable out{parent, std::vector<double>(parent.n_configs())};
    if (sub.values.size() * 2 != out.values.size())
        throw std::invalid_argument("lift_from_frozen: table size mismatch");
    for (std::size_t cfg = 0; cfg < out.values.size(); ++cfg)
        out.values[cfg] = sub.values[remove_bit(static_cast<SpinWord>(cfg), bit)];
    return out;
}

CorrelationMatrices correlation_matrices(const GibbsTable& g) {
    const int n = g.ctx.n_free();
    const std::size_t size = g.prob.size();
    CorrelationMatrices out;
    out.m = Eigen::VectorXd::Zero(n);
    for (std::size_t cfg = 0; cfg < size; ++cfg)
        for (int b = 0; b < n; ++b)
            out.m[b] += g.prob[cfg] * spin_of(static_cast<SpinWord>(cfg), b);

    out.M = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t cfg = 0; cfg < size; ++cfg) {
        for (int i = 0; i < n; ++i) {
            double di = spin_of(static_cast<SpinWord>(cfg), i) - out.m[i];
            for (int j = i; j < n; ++j)
                out.M(i, j) += g.prob[cfg] * di * (spin_of(static_cast<SpinWord>(cfg), j) - out.m[j]);
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) out.M(i, j) = out.M(j, i);

    out.lambda = Eigen::VectorXd(n);
    for (int i = 0; i < n; ++i) out.lambda[i] = 1.0 / (1.0 - out.m[i] * out.m[i]);
    return out;
}

Eigen::VectorXd spin_covariances(const GibbsTable& g, const FunctionTable& f) {
    check_ctx(f, g);
    const int n = g.ctx.n_free();
    double mf = expectation(g, f);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    for (std::size_t cfg = 0; cfg < g.prob.size(); ++cfg)
        for (int b = 0; b < n; ++b)
            m[b] += g.prob[cfg] * spin_of(static_cast<SpinWord>(cfg), b);
    Eigen::VectorXd cov = Eigen::VectorXd::Zero(n);
    for (std::size_t cfg = 0; cfg < g.prob.size(); ++cfg) {
        double df = f.values[cfg] - mf;
        for (int b = 0; b < n; ++b)
            cov[b] += g.prob[cfg] * df * (spin_of(static_cast<SpinWord>(cfg), b) - m[b]);
    }
    return cov;
}

void dump_gibbs_csv(const GibbsTable& g, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "index,spins,probability\n";
    for (std::size_t cfg = 0; cfg < g.prob.size(); ++cfg) {
        out << cfg << ",";
        for (int b = 0; b < g.ctx.n_free(); ++b)
            out << (spin_of(static_cast<SpinWord>(cfg), b) > 0 ? '+' : '-');
        out << "," << g.prob[cfg] << "\n";
    }
}

std::pair<double, double> single_spin_variance_identity(const GibbsTable& g,
                                                        const FunctionTable& f, int site) {
    check_ctx(f, g);
    int bit = g.ctx.free_slot(site);
    // f must be measurable w.r.t. sigma_site: constant on each fiber.
    double v[2] = {f.values[0], f.values[flip_bit(0, bit)]};
    for (std::size_t cfg = 0; cfg < f.values.size(); ++cfg) {
        double want = v[(cfg >> bit) & 1u];
        if (std::abs(f.values[cfg] - want) > 1e-12)
            throw std::invalid_argument("single_spin_variance_identity: f depends on other spins");
    }
    double lhs = covariance(g, f, f);
    FunctionTable spin = site_spin_table(g.ctx, site);
    double c = covariance(g, f, spin);
    double m = expectation(g, spin);
    double rhs = c * c / (1.0 - m * m);
    return {lhs, rhs};
}

}  // namespace spingap
