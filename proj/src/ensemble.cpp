#include "spingap/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <stdexcept>

#include "spingap/diagnostics.hpp"
#include "spingap/gibbs.hpp"
#include "spingap/parallel.hpp"
#include "spingap/rng.hpp"

namespace spingap {

void ExperimentPlan::validate() const {
    base.validate();
    if (beta_scale.empty()) throw std::invalid_argument("ExperimentPlan: beta_scale grid is empty");
    if (n_realizations < 1)
        throw std::invalid_argument("ExperimentPlan: n_realizations must be >= 1");
    static const std::vector<std::string> known = {"hjid", "smatrix", "conditioning", "indu_m"};
    for (const auto& c : checks)
        if (std::find(known.begin(), known.end(), c) == known.end())
            throw std::invalid_argument("ExperimentPlan: unknown check '" + c + "'");
}

ExperimentPlan make_plan(const ParsedConfig& cfg) {
    if (!cfg.experiment)
        throw std::invalid_argument("config has no [experiment] section");
    ExperimentPlan plan;
    plan.base = cfg.model;
    plan.beta_scale = cfg.experiment->beta_scale;
    plan.n_realizations = cfg.experiment->n_realizations;
    plan.epsilon = cfg.experiment->epsilon;
    plan.checks = cfg.experiment->checks;
    plan.out_dir = cfg.experiment->out.empty() ? "out" : cfg.experiment->out;
    plan.exact_omega = cfg.experiment->exact_omega;
    plan.omega_samples = cfg.experiment->omega_samples;
    plan.validate();
    return plan;
}

namespace {

double worst_of(const std::vector<InequalityReport>& reports) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& r : reports)
        worst = std::min(worst, r.two_sided ? -std::abs(r.slack) : r.slack);
    return worst;
}

RealizationRow run_realization(const ExperimentPlan& plan, int gi, int ri) {
    RealizationRow row;
    row.grid_index = gi;
    row.realization = ri;
    row.beta_scale = plan.beta_scale[static_cast<std::size_t>(gi)];
    row.seed = derive_seed(plan.base.seed, static_cast<std::uint64_t>(gi),
                           static_cast<std::uint64_t>(ri));

    ModelSpec spec = plan.base;
    spec.seed = row.seed;
    for (auto& term : spec.mixing) term.beta_p *= row.beta_scale;

    Disorder dis = sample_disorder(spec);
    Subsystem sub = build_subsystem(spec, dis, SubsystemContext::full(spec.n_spins),
                                    plan.gap.eigen_budget);
    GapResult gap = inverse_spectral_gap(sub.gibbs, sub.cavity, plan.gap);
    row.a = gap.a;
    row.residual = gap.residual;

    OmegaResult omega = omega_check(spec, dis,
                                    plan.exact_omega ? OmegaMode::exact : OmegaMode::sampled,
                                    static_cast<std::size_t>(plan.omega_samples));
    row.omega = omega.holds;
    row.omega_sup = omega.observed_sup;

    for (const auto& check : plan.checks) {
        if (check == "hjid") {
            FunctionTable f = random_table(sub.ctx, row.seed, 0x686a6964u);
            row.worst_slack[check] = worst_of(hjid_check(sub, f));
        } else if (check == "smatrix") {
            Eigen::MatrixXd s = s_matrix(sub.gibbs, sub.cavity);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
            row.worst_slack[check] = es.eigenvalues()(0);
        } else if (check == "conditioning") {
            double a_sub = max_subsystem_gap(spec, dis, 1, plan.gap).a;
            FunctionTable f = random_table(sub.ctx, row.seed, 0x636f6e64u);
            row.worst_slack[check] =
                conditioning_lemma_check(sub, f, a_sub, true).slack;
        } else if (check == "indu_m") {
            double a_sub = max_subsystem_gap(spec, dis, 1, plan.gap).a;
            FunctionTable f = random_table(sub.ctx, row.seed, 0x696e6475u);
            row.worst_slack[check] = worst_of(indu_m_check(sub, f, row.a, a_sub, true));
        }
    }
    return row;
}

double quantile(std::vector<double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::vector<GridAggregate> aggregate_rows(const ExperimentPlan& plan,
                                          const std::vector<RealizationRow>& rows) {
    std::vector<GridAggregate> out;
    for (std::size_t gi = 0; gi < plan.beta_scale.size(); ++gi) {
        GridAggregate agg;
        agg.beta_scale = plan.beta_scale[gi];
        std::vector<double> values;
        std::size_t omega_count = 0, exceed = 0;
        for (const auto& row : rows) {
            if (row.grid_index != static_cast<int>(gi)) continue;
            values.push_back(row.a);
            if (row.omega) ++omega_count;
            if (row.a > 1.0 + plan.epsilon) ++exceed;
        }
        if (values.empty()) continue;
        agg.n = static_cast<int>(values.size());
        agg.p_exceed = static_cast<double>(exceed) / static_cast<double>(values.size());
        agg.stderr_p =
            std::sqrt(agg.p_exceed * (1.0 - agg.p_exceed) / static_cast<double>(values.size()));
        agg.mean_a = 0.0;
        for (double v : values) agg.mean_a += v;
        agg.mean_a /= static_cast<double>(values.size());
        std::sort(values.begin(), values.end());
        agg.min_a = values.front();
        agg.max_a = values.back();
        agg.q25_a = quantile(values, 0.25);
        agg.median_a = quantile(values, 0.5);
        agg.q75_a = quantile(values, 0.75);
        agg.omega_freq = static_cast<double>(omega_count) / static_cast<double>(values.size());
        out.push_back(agg);
    }
    return out;
}

EnsembleReport run_ensemble(const ExperimentPlan& plan, int threads) {
    plan.validate();
    EnsembleReport report;
    report.plan = plan;

    const std::size_t per_grid = static_cast<std::size_t>(plan.n_realizations);
    for (std::size_t gi = 0; gi < plan.beta_scale.size(); ++gi) {
        std::vector<RealizationRow> grid_rows(per_grid);
        try {
            parallel_for(per_grid, threads, [&](std::size_t ri) {
                grid_rows[ri] = run_realization(plan, static_cast<int>(gi), static_cast<int>(ri));
            });
        } catch (...) {
            // Flush whatever finished before the failure.
            report.complete = false;
            report.aggregates = aggregate_rows(plan, report.rows);
            if (!plan.out_dir.empty()) sweep_report(report);
            throw;
        }
        report.rows.insert(report.rows.end(), grid_rows.begin(), grid_rows.end());
    }
    report.aggregates = aggregate_rows(plan, report.rows);
    return report;
}

void sweep_report(const EnsembleReport& report) {
    const auto& plan = report.plan;
    std::filesystem::create_directories(plan.out_dir);

    {
        std::ofstream out(plan.out_dir / "realizations.csv");
        if (!out) throw std::runtime_error("cannot write realizations.csv");
        out.precision(17);
        out << "beta_scale,realization,seed,a,residual,omega,omega_sup";
        for (const auto& check : plan.checks) out << ",worst_slack_" << check;
        out << "\n";
        for (const auto& row : report.rows) {
            out << row.beta_scale << "," << row.realization << "," << row.seed << "," << row.a
                << "," << row.residual << "," << (row.omega ? 1 : 0) << "," << row.omega_sup;
            for (const auto& check : plan.checks) out << "," << row.worst_slack.at(check);
            out << "\n";
        }
    }

    {
        std::ofstream out(plan.out_dir / "aggregate.csv");
        if (!out) throw std::runtime_error("cannot write aggregate.csv");
        out.precision(17);
        out << "beta_scale,n_spins,n,p_exceed,stderr,mean_a,min_a,q25_a,median_a,q75_a,max_a,"
               "omega_freq\n";
        for (const auto& agg : report.aggregates)
            out << agg.beta_scale << "," << plan.base.n_spins << "," << agg.n << ","
                << agg.p_exceed << "," << agg.stderr_p << "," << agg.mean_a << "," << agg.min_a
                << "," << agg.q25_a << "," << agg.median_a << "," << agg.q75_a << ","
                << agg.max_a << "," << agg.omega_freq << "\n";
    }

    {
        nlohmann::json j;
        j["n_spins"] = plan.base.n_spins;
        nlohmann::json mixing = nlohmann::json::array();
        for (const auto& term : plan.base.mixing) mixing.push_back({term.p, term.beta_p});
        j["mixing"] = mixing;
        j["seed"] = plan.base.seed;
        j["beta_scale"] = plan.beta_scale;
        j["n_realizations"] = plan.n_realizations;
        j["epsilon"] = plan.epsilon;
        j["checks"] = plan.checks;
        j["omega_mode"] = plan.exact_omega ? "exact" : "sampled";
        j["omega_samples"] = plan.omega_samples;
        j["complete"] = report.complete;
        nlohmann::json aggs = nlohmann::json::array();
        for (const auto& agg : report.aggregates) {
            nlohmann::json a;
            a["beta_scale"] = agg.beta_scale;
            a["n"] = agg.n;
            a["p_exceed"] = agg.p_exceed;
            a["stderr"] = agg.stderr_p;
            a["mean_a"] = agg.mean_a;
            a["min_a"] = agg.min_a;
            a["q25_a"] = agg.q25_a;
            a["median_a"] = agg.median_a;
            a["q75_a"] = agg.q75_a;
            a["max_a"] = agg.max_a;
            a["omega_freq"] = agg.omega_freq;
            aggs.push_back(a);
        }
        j["aggregates"] = aggs;
        std::ofstream out(plan.out_dir / "summary.json");
        if (!out) throw std::runtime_error("cannot write summary.json");
        out << j.dump(2) << "\n";
    }
}

}  // namespace spingap
