#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "spingap/config.hpp"
#include "spingap/diagnostics.hpp"
#include "spingap/ensemble.hpp"
#include "spingap/gap.hpp"
#include "spingap/gibbs.hpp"
#include "spingap/glauber.hpp"
#include "spingap/model.hpp"
#include "spingap/rng.hpp"

namespace {

using namespace spingap;
namespace fs = std::filesystem;

struct CommonOpts {
    std::string config;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string out = "out";
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
    auto* c = cmd->add_option("--config", opts.config, "model/plan config file");
    if (config_required) c->required();
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--threads", opts.threads, "worker threads (default: machine)");
    cmd->add_option("--out", opts.out, "output directory for machine-readable files");
}

ParsedConfig load(const CommonOpts& opts) {
    ParsedConfig cfg = load_config(opts.config);
    if (opts.seed) cfg.model.seed = *opts.seed;
    return cfg;
}

nlohmann::json gap_json(const GapResult& gap, bool include_witness) {
    nlohmann::json j;
    j["a"] = gap.a;
    j["residual"] = gap.residual;
    j["ctx"] = gap.witness.ctx.descriptor();
    if (include_witness) j["witness"] = gap.witness.values;
    return j;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

int cmd_gen_disorder(const CommonOpts& opts) {
    ParsedConfig cfg = load(opts);
    Disorder dis = sample_disorder(cfg.model);
    fs::create_directories(opts.out);
    fs::path path = fs::path(opts.out) / "disorder.bin";
    dis.save(path);
    std::size_t total = 0;
    for (int p : dis.supported_p()) total += dis.couplings(p).size();
    std::printf("wrote %s (%zu entries across %zu degrees)\n", path.c_str(), total,
                dis.supported_p().size());
    return 0;
}

int cmd_gap(const CommonOpts& opts, bool all_k) {
    ParsedConfig cfg = load(opts);
    const ModelSpec& spec = cfg.model;
    Disorder dis = sample_disorder(spec);
    GapOptions gopts;
    gopts.threads = opts.threads;
    fs::create_directories(opts.out);

    if (all_k) {
        nlohmann::json rows = nlohmann::json::array();
        std::printf("%4s %7s %14s  %s\n", "k", "free", "a_{N-k}", "argmax");
        double a_full = 0.0;
        for (int k = spec.n_spins - 1; k >= 0; --k) {
            MaxGapResult r = max_subsystem_gap(spec, dis, k, gopts);
            std::printf("%4d %7d %14.9f  %s\n", k, spec.n_spins - k, r.a,
                        r.argmax.descriptor().c_str());
            nlohmann::json row;
            row["k"] = k;
            row["a"] = r.a;
            row["ctx"] = r.argmax.descriptor();
            row["exact"] = r.exact;
            row["n_instances"] = r.n_instances;
            rows.push_back(row);
            if (k == 0) a_full = r.a;
        }
        write_json(fs::path(opts.out) / "gaps.json", rows);
        std::printf("a = %.6f\n", a_full);
    } else {
        GapResult gap = inverse_spectral_gap(spec, dis, SubsystemContext::full(spec.n_spins),
                                             gopts);
        std::printf("a = %.6f\n", gap.a);
        std::printf("residual = %.3e\n", gap.residual);
        write_json(fs::path(opts.out) / "gap.json", gap_json(gap, spec.n_spins <= 8));
    }
    return 0;
}

struct DiagnoseOpts {
    std::string checks = "all";
    double epsilon = 0.01;
    bool exact_omega = false;
};

std::vector<std::string> parse_checks(const std::string& csv) {
    static const std::vector<std::string> all = {
        "identities", "hjid",   "smatrix",    "xq",   "omega",    "conditioning",
        "indu_m",     "bd_m",   "exp_moment", "lm41", "dichotomy"};
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        std::string item = csv.substr(start, comma == std::string::npos ? comma : comma - start);
        if (item == "all") return all;
        if (!item.empty()) {
            if (std::find(all.begin(), all.end(), item) == all.end())
                throw std::invalid_argument("unknown check '" + item + "'");
            out.push_back(item);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("empty check list");
    return out;
}

constexpr std::uint64_t kDiagCtxTag = 0x64696167u;
constexpr std::uint64_t kDiagFnTag = 0x6466756eu;

// Deterministic context draws: the full system plus sampled conditioned
// subsystems with at least two free sites.
std::vector<SubsystemContext> diagnostic_contexts(const ModelSpec& spec, std::size_t n_draws) {
    std::vector<SubsystemContext> out;
    out.push_back(SubsystemContext::full(spec.n_spins));
    int max_k = std::min(spec.n_spins - 2, 4);
    if (max_k < 1) return out;
    for (std::size_t i = 0; i < n_draws; ++i) {
        RandomStream rs(derive_seed(spec.seed, kDiagCtxTag, i), 0);
        int k = 1 + static_cast<int>(rs.next_below(static_cast<std::uint32_t>(max_k)));
        std::vector<int> pool(static_cast<std::size_t>(spec.n_spins));
        for (int s = 0; s < spec.n_spins; ++s) pool[static_cast<std::size_t>(s)] = s;
        std::vector<std::pair<int, int>> frozen;
        std::vector<int> removed;
        for (int s = 0; s < k; ++s) {
            std::uint32_t j = s + rs.next_below(static_cast<std::uint32_t>(spec.n_spins - s));
            std::swap(pool[static_cast<std::size_t>(s)], pool[j]);
            std::uint64_t roll = rs.next_bits();
            if (roll & 1u)
                frozen.emplace_back(pool[static_cast<std::size_t>(s)], (roll & 2u) ? +1 : -1);
            else
                removed.push_back(pool[static_cast<std::size_t>(s)]);
        }
        out.push_back(SubsystemContext::make(spec.n_spins, frozen, removed));
    }
    return out;
}

int cmd_diagnose(const CommonOpts& opts, const DiagnoseOpts& dopts) {
    ParsedConfig cfg = load(opts);
    const ModelSpec& spec = cfg.model;
    std::vector<std::string> checks = parse_checks(dopts.checks);
    auto enabled = [&](const std::string& name) {
        return std::find(checks.begin(), checks.end(), name) != checks.end();
    };

    Disorder dis = sample_disorder(spec);
    GapOptions gopts;
    gopts.threads = opts.threads;
    double beta = beta_aggregate(spec);

    OmegaResult omega = omega_check(spec, dis,
                                    dopts.exact_omega ? OmegaMode::exact : OmegaMode::sampled);
    std::vector<InequalityReport> reports;
    if (enabled("omega")) {
        InequalityReport r;
        r.name = "omega";
        r.lhs = omega.observed_sup;
        r.rhs = omega.bound;
        r.slack = r.rhs - r.lhs;
        r.hypothesis_met = false;  // probabilistic event: recorded, never asserted
        r.asserted = false;
        r.ctx = SubsystemContext::full(spec.n_spins).descriptor();
        r.extra["mode"] = omega.mode == OmegaMode::exact ? 1.0 : 0.0;
        r.extra["n_instances"] = static_cast<double>(omega.n_instances);
        reports.push_back(std::move(r));
    }

    std::vector<SubsystemContext> contexts = diagnostic_contexts(spec, 5);
    // Exact maximal gaps per subsystem level, computed on demand.
    std::map<int, double> a_levels;
    auto a_level = [&](int k) {
        auto it = a_levels.find(k);
        if (it != a_levels.end()) return it->second;
        double a = max_subsystem_gap(spec, dis, k, gopts).a;
        a_levels.emplace(k, a);
        return a;
    };

    const std::vector<double> k_grid = {-20.0, -5.0, -1.0, 1.0, 5.0, 20.0};
    std::size_t ctx_index = 0;
    for (const auto& ctx : contexts) {
        Subsystem sub = build_subsystem(spec, dis, ctx, gopts.eigen_budget);
        FunctionTable f = random_table(ctx, derive_seed(spec.seed, kDiagFnTag, ctx_index), 0);
        int k = ctx.k();

        if (enabled("identities")) {
            auto rs = identities_check(sub);
            reports.insert(reports.end(), rs.begin(), rs.end());
        }
        if (enabled("hjid")) {
            auto rs = hjid_check(sub, f);
            reports.insert(reports.end(), rs.begin(), rs.end());
        }
        if (enabled("smatrix")) {
            Eigen::MatrixXd s = s_matrix(sub.gibbs, sub.cavity);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
            InequalityReport r;
            r.name = "smatrix_psd";
            r.lhs = -es.eigenvalues()(0);
            r.rhs = 0.0;
            r.slack = es.eigenvalues()(0);
            r.hypothesis_met = true;
            r.asserted = true;
            r.tol = 1e-10;
            r.ctx = ctx.descriptor();
            r.extra["norm"] = operator_norm(s);
            reports.push_back(std::move(r));
        }
        if (enabled("xq")) {
            SpinWord probe = static_cast<SpinWord>(
                bits_at(spec.seed, kDiagCtxTag, 1000 + ctx_index) &
                ((std::uint64_t{1} << ctx.n_free()) - 1u));
            auto rs = xq_iq_check(cavity_jacobian(spec, dis, ctx, probe), 6, beta);
            reports.insert(reports.end(), rs.begin(), rs.end());
        }
        if (ctx.n_free() >= 2) {
            if (enabled("conditioning")) {
                reports.push_back(conditioning_lemma_check(sub, f, a_level(k + 1), true));
            }
            if (enabled("indu_m")) {
                double a_this = inverse_spectral_gap(sub.gibbs, sub.cavity, gopts).a;
                auto rs = indu_m_check(sub, f, a_this, a_level(k + 1), true);
                reports.insert(reports.end(), rs.begin(), rs.end());
            }
            if (enabled("lm41")) {
                reports.push_back(lm41_check(spec, sub, f, dopts.epsilon, a_level(k + 1),
                                             omega.holds));
            }
            if (enabled("bd_m")) {
                int site = ctx.free_sites.front();
                auto rs = bd_m_check(spec, dis, sub, site, k_grid, dopts.epsilon, omega.holds,
                                     gopts);
                reports.insert(reports.end(), rs.begin(), rs.end());
            }
            if (enabled("exp_moment")) {
                int site = ctx.free_sites.front();
                for (double kv : k_grid)
                    reports.push_back(exp_moment_check(spec, dis, sub, site, kv, dopts.epsilon,
                                                       omega.holds, gopts));
            }
        }
        ++ctx_index;
    }

    if (enabled("dichotomy")) {
        for (int k = 0; k <= spec.n_spins - 2; ++k) {
            DichotomyResult r = dichotomy_check(spec, dis, k, dopts.epsilon, omega.holds, gopts);
            reports.push_back(r.core);
        }
    }

    fs::create_directories(opts.out);
    write_reports_jsonl(fs::path(opts.out) / "reports.jsonl", reports);
    write_summary_csv(fs::path(opts.out) / "summary.csv", reports);

    std::size_t violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (const auto& r : reports) {
        if (r.violated()) ++violations;
        min_slack = std::min(min_slack, r.slack);
    }
    std::printf("%zu reports, %zu hard-assert violations (omega %s, sup %.4f vs 5*beta %.4f)\n",
                reports.size(), violations, omega.holds ? "holds" : "fails", omega.observed_sup,
                omega.bound);
    return violations == 0 ? 0 : 1;
}

int cmd_glauber(const CommonOpts& opts, std::size_t steps, std::size_t burn_in,
                bool dump_trajectory) {
    ParsedConfig cfg = load(opts);
    const ModelSpec& spec = cfg.model;
    Disorder dis = sample_disorder(spec);
    TrajectoryStats stats = estimate_relaxation(spec, dis, steps, burn_in);

    std::printf("sweeps = %zu (sweep = %d updates)\n", stats.n_sweeps, stats.sweep_length);
    std::printf("tau_int magnetization = %.4f sweeps\n", stats.tau_int_magnetization);
    std::printf("tau_int energy        = %.4f sweeps\n", stats.tau_int_energy);
    std::printf("flip fraction         = %.4f\n", stats.flip_fraction);

    fs::create_directories(opts.out);
    nlohmann::json j;
    j["n_sweeps"] = stats.n_sweeps;
    j["sweep_length"] = stats.sweep_length;
    j["tau_int_magnetization"] = stats.tau_int_magnetization;
    j["tau_int_energy"] = stats.tau_int_energy;
    j["flip_fraction"] = stats.flip_fraction;
    j["steps"] = steps;
    j["burn_in"] = burn_in;
    write_json(fs::path(opts.out) / "trajectory_stats.json", j);

    if (dump_trajectory) {
        std::ofstream out(fs::path(opts.out) / "trajectory.csv");
        if (!out) throw std::runtime_error("cannot write trajectory.csv");
        out.precision(17);
        out << "sweep,magnetization,energy\n";
        for (std::size_t i = 0; i < stats.n_sweeps; ++i)
            out << i << "," << stats.magnetization[i] << "," << stats.energy[i] << "\n";
    }
    return 0;
}

int cmd_ensemble(const CommonOpts& opts, bool out_given) {
    ParsedConfig cfg = load(opts);
    ExperimentPlan plan = make_plan(cfg);
    if (out_given) plan.out_dir = opts.out;
    EnsembleReport report = run_ensemble(plan, opts.threads);
    sweep_report(report);
    std::printf("%8s %5s %10s %10s %10s %10s\n", "scale", "n", "P(a>1+e)", "stderr", "mean_a",
                "omega");
    for (const auto& agg : report.aggregates)
        std::printf("%8.4f %5d %10.4f %10.4f %10.6f %10.4f\n", agg.beta_scale, agg.n,
                    agg.p_exceed, agg.stderr_p, agg.mean_a, agg.omega_freq);
    std::printf("outputs in %s\n", plan.out_dir.c_str());
    return 0;
}

int cmd_replay(const CommonOpts& opts, double epsilon) {
    ParsedConfig cfg = load(opts);
    const ModelSpec& spec = cfg.model;
    Disorder dis = sample_disorder(spec);
    GapOptions gopts;
    gopts.threads = opts.threads;
    auto steps = induction_replay(spec, dis, epsilon, gopts);

    double band = 1.0 + 40.0 * std::pow(epsilon, 0.25);
    std::printf("band 1 + 40 eps^(1/4) = %.6f\n", band);
    std::printf("%4s %6s %14s %8s %8s\n", "k", "size", "a_{N-k}", "in-band", "a<=5a'");
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& step : steps) {
        std::printf("%4d %6d %14.9f %8s %8s\n", step.k, spec.n_spins - step.k, step.a,
                    step.within_band ? "yes" : "no", step.bounded_growth ? "yes" : "no");
        nlohmann::json row;
        row["k"] = step.k;
        row["a"] = step.a;
        row["within_band"] = step.within_band;
        row["bounded_growth"] = step.bounded_growth;
        rows.push_back(row);
    }
    fs::create_directories(opts.out);
    nlohmann::json j;
    j["epsilon"] = epsilon;
    j["band"] = band;
    j["steps"] = rows;
    j["a_full"] = steps.back().a;
    write_json(fs::path(opts.out) / "replay.json", j);
    std::printf("a = %.6f\n", steps.back().a);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact and Monte Carlo engine for mixed p-spin spectral gaps"};
    app.set_version_flag("--version", "spingap 0.1.0");
    app.require_subcommand(1);

    CommonOpts gen_opts;
    auto* gen = app.add_subcommand("gen-disorder", "sample couplings and write a binary dump");
    add_common(gen, gen_opts);

    CommonOpts gap_opts;
    bool all_k = false;
    auto* gap_cmd = app.add_subcommand("gap", "inverse spectral gap of the full system");
    add_common(gap_cmd, gap_opts);
    gap_cmd->add_flag("--all-k", all_k, "also the maximal gap of every subsystem level");

    CommonOpts diag_opts;
    DiagnoseOpts diag;
    auto* diag_cmd = app.add_subcommand("diagnose", "run named checks, write JSON-lines reports");
    add_common(diag_cmd, diag_opts);
    diag_cmd->add_option("--checks", diag.checks, "comma-separated check names or 'all'");
    diag_cmd->add_option("--epsilon", diag.epsilon, "epsilon for hypothesis-conditioned checks");
    diag_cmd->add_flag("--exact-omega", diag.exact_omega, "enumerate the omega sup exactly");

    CommonOpts glauber_opts;
    std::size_t steps = 1'000'000;
    std::size_t burn_in = 10'000;
    bool dump_trajectory = false;
    auto* glauber_cmd = app.add_subcommand("glauber", "heat-bath chain and relaxation estimate");
    add_common(glauber_cmd, glauber_opts);
    glauber_cmd->add_option("--steps", steps, "total single-site updates");
    glauber_cmd->add_option("--burn-in", burn_in, "updates discarded before measuring");
    glauber_cmd->add_flag("--dump-trajectory", dump_trajectory, "write per-sweep series CSV");

    CommonOpts ens_opts;
    auto* ens_cmd = app.add_subcommand("ensemble", "disorder sweep over a beta-scale grid");
    ens_cmd->add_option("--config,--plan", ens_opts.config, "plan config with [experiment]")
        ->required();
    ens_cmd->add_option("--seed", ens_opts.seed, "override the config seed");
    ens_cmd->add_option("--threads", ens_opts.threads, "worker threads (default: machine)");
    auto* ens_out = ens_cmd->add_option("--out", ens_opts.out, "output directory override");

    CommonOpts replay_opts;
    double replay_eps = 0.01;
    auto* replay_cmd = app.add_subcommand("replay", "replay the subsystem-size induction");
    add_common(replay_cmd, replay_opts);
    replay_cmd->add_option("--epsilon", replay_eps, "epsilon for the induction band");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_disorder(gen_opts);
        if (gap_cmd->parsed()) return cmd_gap(gap_opts, all_k);
        if (diag_cmd->parsed()) return cmd_diagnose(diag_opts, diag);
        if (glauber_cmd->parsed()) return cmd_glauber(glauber_opts, steps, burn_in,
                                                      dump_trajectory);
        if (ens_cmd->parsed()) return cmd_ensemble(ens_opts, ens_out->count() > 0);
        if (replay_cmd->parsed()) return cmd_replay(replay_opts, replay_eps);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
