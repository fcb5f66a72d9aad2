// morl: command-line driver for the warehouse experiments and the tabular testbed.
#include "morl/artifacts.hpp"
#include "morl/config.hpp"
#include "morl/experiments.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace morl;

namespace {

struct Globals {
    std::string config_path;
    std::vector<std::string> overrides;
    bool full_scale = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> seeds;
    std::optional<std::size_t> jobs;
    std::string output_root;
    std::string run_dir;
    std::string verify;
};

ExperimentConfig build_config(const Globals& g) {
    ExperimentConfig cfg = g.full_scale ? full_scale_preset() : desk_preset();
    if (!g.config_path.empty()) cfg = load_config(g.config_path, cfg);
    for (const auto& o : g.overrides) apply_override(cfg, o);
    if (g.seed) cfg.seed = *g.seed;
    if (g.seeds) cfg.seeds = *g.seeds;
    if (g.jobs) cfg.jobs = *g.jobs;
    cfg.validate();
    return cfg;
}

std::string resolve_run_dir(const Globals& g, const ExperimentConfig& cfg, const std::string& sub) {
    if (!g.run_dir.empty()) return g.run_dir;
    std::string root = cfg.output;
    if (const char* env = std::getenv("MORL_OUTPUT_ROOT"); env && *env) root = env;
    if (!g.output_root.empty()) root = g.output_root;
    return (fs::path(root) / (sub + "_" + hex64(cfg.hash()).substr(0, 8))).string();
}

template <class Fn> void write_file(RunManifest& m, const std::string& rel, Fn&& fn) {
    {
        std::ofstream f(m.path(rel), std::ios::binary);
        if (!f) throw ConfigError("cannot write " + m.path(rel));
        fn(f);
    }
    m.add(rel);
}

std::vector<std::uint64_t> seed_list(const ExperimentConfig& cfg) {
    std::vector<std::uint64_t> s;
    for (std::size_t k = 0; k < cfg.seeds; ++k) s.push_back(cfg.seed + k);
    return s;
}

/// Config for one member of a seed batch.
ExperimentConfig single_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    ExperimentConfig c = cfg;
    c.seed = seed;
    c.seeds = 1;
    return c;
}

std::string seed_dir(const std::string& dir, std::uint64_t seed) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "seed_%04llu", static_cast<unsigned long long>(seed));
    return (fs::path(dir) / buf).string();
}

/// Directories of a (possibly batched) run: seed_* children if present, else `dir`.
std::vector<std::string> member_runs(const std::string& dir) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) throw ConfigError("run directory not found: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0 &&
            fs::exists(e.path() / "rounds.csv"))
            out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    if (out.empty()) out.push_back(dir);
    return out;
}

ExperimentConfig config_of_run(const std::string& dir) {
    const auto path = (fs::path(dir) / "config.ini").string();
    if (!fs::exists(path)) throw ConfigError("missing " + path);
    return load_config(path);
}

// *************************************************************************************

int cmd_single_objective(const ExperimentConfig& cfg, const std::string& dir) {
    const auto seeds = seed_list(cfg);
    std::vector<std::tuple<std::uint64_t, double, double>> rows;
    for (auto seed : seeds) {
        const auto c = single_seed(cfg, seed);
        RunManifest m(seeds.size() == 1 ? dir : seed_dir(dir, seed), "single-objective", c.serialize(), {seed});
        const auto run = run_single_objective(c, seed);
        write_file(m, "curve.csv", [&](std::ostream& f) { write_curve_csv(f, run.result.curve); });
        save_checkpoint(m.path("checkpoint.qnet"), run.result.policy->network(), c.hash());
        m.add("checkpoint.qnet");
        const double imp = run.result.curve.size() >= 10 ? curve_improvement(run.result.curve) : std::nan("");
        m.note("improvement_last5_vs_first5", std::to_string(imp));
        m.finish();
        rows.emplace_back(seed, imp, run.seconds);
        std::cout << "seed " << seed << ": " << run.result.curve.size() << " episodes, improvement " << imp
                  << ", " << run.seconds << " s\n";
    }
    if (seeds.size() > 1) {
        RunManifest top(dir, "single-objective", cfg.serialize(), seeds);
        write_file(top, "improvement.csv", [&](std::ostream& f) {
            f << "seed,improvement,seconds\n";
            for (const auto& [s, imp, sec] : rows) f << s << ',' << imp << ',' << sec << '\n';
        });
        top.finish();
    }
    return 0;
}

int cmd_game_warehouse(const ExperimentConfig& cfg, const std::string& dir) {
    const auto seeds = seed_list(cfg);
    std::vector<GameTrace> traces;
    bool failed = false;
    for (auto seed : seeds) {
        const auto c = single_seed(cfg, seed);
        const auto sdir = seeds.size() == 1 ? dir : seed_dir(dir, seed);
        RunManifest m(sdir, "repeated-game", c.serialize(), {seed});
        std::ofstream rounds(m.path("rounds.csv"), std::ios::binary);
        write_rounds_csv_header(rounds, c.constraints().size());
        auto run = run_warehouse_game(c, seed, m.path("checkpoints"), [&](const RoundRecord& r) {
            write_rounds_csv_row(rounds, r);
            rounds.flush();
            std::cout << "seed " << seed << " round " << r.round << " V0 " << r.values[0] << " |lambda| "
                      << r.lambda.l1() << (r.feasible ? " feasible" : "") << '\n';
        });
        rounds.close();
        m.add("rounds.csv");
        m.add_tree("checkpoints");
        write_file(m, "lambdas.csv", [&](std::ostream& f) { write_lambdas_csv(f, run.trace); });
        write_file(m, "curves.csv", [&](std::ostream& f) { write_round_curves_csv(f, run.curves); });
        if (!run.trace.rounds.empty()) {
            const auto env = make_warehouse(c);
            const auto mix = evaluate_mixture(run.trace, run.trace.size(), env, c.n_eval, derive_seed(seed, 5), c.jobs);
            write_file(m, "mixture.csv", [&](std::ostream& f) {
                f << "source,rounds";
                for (std::size_t i = 0; i < mix.size(); ++i) f << ",v_" << i;
                f << '\n';
                f.precision(12);
                for (std::size_t t = 1; t <= run.trace.size(); ++t) {
                    f << "running_mean," << t;
                    for (double v : run.trace.average_values(t)) f << ',' << v;
                    f << '\n';
                }
                f << "monte_carlo," << run.trace.size();
                for (double v : mix.v) f << ',' << v;
                f << '\n';
            });
        }
        if (run.trace.failure) {
            failed = true;
            m.note("failure", "round " + std::to_string(run.trace.failure->round) + ": " + run.trace.failure->message);
            std::cerr << "seed " << seed << ": training failed in round " << run.trace.failure->round << ": "
                      << run.trace.failure->message << '\n';
        }
        m.note("feasible_rounds", std::to_string(run.trace.feasible_count(run.trace.size())));
        m.finish();
        traces.push_back(std::move(run.trace));
    }
    if (seeds.size() > 1) {
        RunManifest top(dir, "repeated-game", cfg.serialize(), seeds);
        const auto curves = count_feasible_rounds(traces);
        write_file(top, "feasibility.csv", [&](std::ostream& f) { write_feasibility_csv(f, curves); });
        top.note("median_feasible_at_T", std::to_string(curves.median.back()));
        top.finish();
        std::cout << "median cumulative feasible rounds at T: " << curves.median.back() << '\n';
    }
    return failed ? 1 : 0;
}

int cmd_game_tabular(const ExperimentConfig& cfg, const std::string& dir, const std::string& fixture,
                     GameForm form) {
    const TabularGame game = fixture.empty() ? toy_game(cfg.seed) : load_tabular_game(fixture);
    RunManifest m(dir, "repeated-game", cfg.serialize(), {cfg.seed});
    const auto run = run_tabular_game(game, form, cfg);
    write_file(m, "game.game", [&](std::ostream& f) { write_tabular_game(f, game); });
    write_file(m, "rounds.csv", [&](std::ostream& f) { write_tabular_rounds_csv(f, run); });
    for (std::size_t t = 0; t < run.policies.size(); ++t) {
        char rel[48];
        std::snprintf(rel, sizeof rel, "policies/round_%03zu.policy", t + 1);
        write_file(m, rel, [&](std::ostream& f) { write_tabular_policy(f, run.policies[t]); });
    }
    write_file(m, "tabular_run.txt", [&](std::ostream& f) {
        f.precision(17);
        f << "form " << (form == GameForm::Lagrangian ? "lagrangian" : "reformulated") << '\n'
          << "lambda_bar " << run.scalar_lambda_bar << '\n';
        if (run.gaps)
            f << "gap_upper " << run.gaps->upper << "\ngap_lower " << run.gaps->lower << "\nvalue "
              << run.gaps->value << '\n';
    });
    m.finish();
    std::cout << "rounds " << run.policies.size() << " lambda_bar " << run.scalar_lambda_bar;
    if (run.gaps) std::cout << " gaps " << run.gaps->upper << ' ' << run.gaps->lower;
    std::cout << '\n';
    return 0;
}

int cmd_extract(const ExperimentConfig& cfg, const std::string& run, const std::string& out_dir,
                std::optional<std::size_t> n_override) {
    if (fs::exists(fs::path(run) / "game.game")) {
        const auto game = load_tabular_game((fs::path(run) / "game.game").string());
        std::ifstream info(fs::path(run) / "tabular_run.txt");
        std::string key;
        double lambda_bar = -1.0;
        while (info >> key)
            if (key == "lambda_bar")
                info >> lambda_bar;
            else
                info.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
        if (lambda_bar < 0.0) throw ConfigError("tabular_run.txt: missing lambda_bar");
        std::vector<TabularPolicy> iterates;
        for (std::size_t t = 1;; ++t) {
            char rel[48];
            std::snprintf(rel, sizeof rel, "policies/round_%03zu.policy", t);
            std::ifstream f(fs::path(run) / rel);
            if (!f) break;
            iterates.push_back(read_tabular_policy(f));
        }
        if (iterates.empty()) throw ConfigError("no round policies under " + run + "/policies");
        const auto n = n_override ? *n_override
                                  : required_samples(lambda_bar, static_cast<double>(game.mdp.horizon), cfg.epsilon,
                                                     cfg.delta, iterates.size());
        RunManifest m(out_dir, "extract", cfg.serialize(), {cfg.seed});
        const auto cert = extraction_certificate(game.mdp, game.spec, iterates, lambda_bar, n, cfg.seed, cfg.jobs);
        write_file(m, "certificate.txt", [&](std::ostream& f) {
            f << "epsilon " << cfg.epsilon << " delta " << cfg.delta << " n " << n << '\n';
            write_certificate(f, cert);
        });
        write_file(m, "estimates.csv", [&](std::ostream& f) { write_estimates_csv(f, cert.table); });
        m.note("holds", cert.holds ? "true" : "false");
        m.finish();
        std::cout << "n " << n << " t* " << cert.t_star << " L(D_t*) " << cert.l_tstar << " bound " << cert.rhs()
                  << (cert.holds ? " holds" : " VIOLATED") << '\n';
        return cert.holds ? 0 : 1;
    }

    const auto runs = member_runs(run);
    RunManifest m(out_dir, "extract", cfg.serialize(), seed_list(cfg));
    for (const auto& r : runs) {
        auto rc = config_of_run(r);
        rc.epsilon = cfg.epsilon;
        rc.delta = cfg.delta;
        rc.max_samples = n_override ? *n_override : cfg.max_samples;
        rc.jobs = cfg.jobs;
        const auto trace = load_game_run(r, rc.constraints());
        const auto x = extract_warehouse(rc, trace, derive_seed(rc.seed, 11));
        const std::string prefix = runs.size() == 1 ? "" : fs::path(r).filename().string() + "/";
        write_file(m, prefix + "certificate.txt", [&](std::ostream& f) { write_warehouse_extraction(f, rc, x); });
        write_file(m, prefix + "estimates.csv", [&](std::ostream& f) { write_estimates_csv(f, x.selection.table); });
        std::cout << r << ": required n " << x.required << ", used " << x.used << ", t* " << x.selection.t_star
                  << '\n';
    }
    m.finish();
    return 0;
}

int cmd_testbed(const ExperimentConfig& cfg, const std::string& dir) {
    RunManifest m(dir, "testbed", cfg.serialize(), {cfg.seed});
    std::vector<std::pair<std::string, bool>> checks;

    const auto fw_games = load_tabular_games(cfg.fixtures, "fw_");
    if (fw_games.empty()) throw ConfigError("no fw_*.game fixtures in " + cfg.fixtures);
    const auto rows = run_fw_suite(fw_games, cfg.fw_iterations, cfg.fw_eps);
    write_file(m, "fw_suite.csv", [&](std::ostream& f) { write_fw_suite_csv(f, rows); });
    bool fw_ok = true;
    for (const auto& r : rows) fw_ok = fw_ok && r.pass;
    checks.emplace_back("frank_wolfe", fw_ok);

    const auto slr = load_tabular_game((fs::path(cfg.fixtures) / "safe_left_right.game").string());
    if (!slr.min_violation) throw ConfigError("safe_left_right.game: missing min_violation");
    const auto cancel = left_right_cancellation(slr);
    write_file(m, "cancellation.csv", [&](std::ostream& f) { write_cancellation_csv(f, cancel); });
    bool cancel_ok = std::abs(cancel.mixture_signed_violation) <= 1e-9;
    for (double g : cancel.member_positive_part) cancel_ok = cancel_ok && g >= *slr.min_violation;
    checks.emplace_back("cancellation", cancel_ok);

    const auto game = load_tabular_game((fs::path(cfg.fixtures) / (cfg.testbed_game + ".game")).string());
    ReformGameSettings rs;
    rs.rounds = cfg.testbed_rounds;
    rs.fw_iterations = cfg.fw_iterations;
    rs.fw_eps = cfg.fw_eps;
    const auto trace = run_reformulated_game(game.mdp, game.spec, rs);
    std::vector<TabularPolicy> iterates;
    for (const auto& r : trace.rounds) iterates.push_back(r.policy);
    const auto conc = run_concentration(game, iterates, cfg.testbed_lambda_bar, cfg.epsilon, cfg.delta,
                                        cfg.repetitions, cfg.seed, cfg.jobs);
    write_file(m, "concentration.csv", [&](std::ostream& f) { write_concentration_csv(f, conc); });
    checks.emplace_back("concentration", conc.pass());

    bool all = true;
    write_file(m, "summary.txt", [&](std::ostream& f) {
        for (const auto& [name, ok] : checks) {
            f << (ok ? "PASS " : "FAIL ") << name << '\n';
            all = all && ok;
        }
    });
    m.finish();
    for (const auto& [name, ok] : checks) std::cout << (ok ? "PASS " : "FAIL ") << name << '\n';
    return all ? 0 : 1;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& dir, const std::string& run,
                 const std::string& checkpoint, const std::string& baseline, bool check) {
    RunManifest m(dir, "evaluate", cfg.serialize(), seed_list(cfg));
    if (!run.empty()) {
        std::vector<SeedComparison> seeds;
        std::vector<std::vector<bool>> flags;
        for (const auto& r : member_runs(run)) {
            const auto rc = single_seed(config_of_run(r), config_of_run(r).seed);
            const auto trace = load_game_run(r, rc.constraints());
            std::vector<bool> f;
            for (const auto& rec : trace.rounds) f.push_back(rec.feasible);
            flags.push_back(std::move(f));
            seeds.push_back(compare_seed(rc, rc.seed, trace));
            const auto& s = seeds.back();
            std::cout << "seed " << rc.seed << ": unconstrained " << s.unconstrained.etph << ", MORL "
                      << (s.morl ? std::to_string(s.morl->etph) : std::string("none")) << ", random "
                      << s.random.etph << '\n';
        }
        const auto verdict = summarize_comparison(seeds);
        write_file(m, "seed_kpis.csv", [&](std::ostream& f) { write_seed_kpis_csv(f, seeds); });
        write_file(m, "comparison.csv", [&](std::ostream& f) { write_comparison_csv(f, verdict.columns); });
        write_file(m, "comparison.txt", [&](std::ostream& f) { write_comparison_text(f, verdict.columns); });
        write_file(m, "feasibility.csv", [&](std::ostream& f) { write_feasibility_csv(f, count_feasible_rounds(flags)); });
        m.note("pattern", verdict.pass() ? "pass" : "fail");
        m.finish();
        write_comparison_text(std::cout, verdict.columns);
        std::cout << "ordering " << verdict.ordered << " separated " << verdict.separated << " baselines violate "
                  << verdict.baselines_violate << " MORL feasible " << verdict.morl_feasible << '\n';
        return check && !verdict.pass() ? 1 : 0;
    }
    auto env = make_warehouse(cfg);
    const auto& spec = env.constraints();
    PolicyPtr policy;
    std::string name;
    if (!checkpoint.empty()) {
        policy = std::make_shared<GreedyQPolicy>(std::make_shared<const Mlp>(load_checkpoint(checkpoint)));
        name = fs::path(checkpoint).stem().string();
    } else {
        const auto kind = baseline == "unconstrained" ? BaselineKind::Unconstrained : BaselineKind::Random;
        policy = make_baseline(kind, env, spec, cfg.baseline_learner(cfg.seed));
        name = baseline;
    }
    std::vector<std::uint64_t> eval_seeds;
    for (auto s : seed_list(cfg)) eval_seeds.push_back(derive_seed(s, 99));
    const auto rep = evaluate_policy(env, policy, spec, cfg.report_episodes, eval_seeds, cfg.jobs);
    const auto col = summarize_column(name, {rep});
    write_file(m, "kpi.csv", [&](std::ostream& f) { write_comparison_csv(f, {col}); });
    m.finish();
    write_comparison_text(std::cout, {col});
    return 0;
}

int cmd_verify(const std::string& dir) {
    const auto rep = verify_run(dir);
    for (const auto& p : rep.problems) std::cout << p << '\n';
    std::cout << (rep.ok ? "verified " : "verification failed ") << dir << '\n';
    return rep.ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained multi-objective RL for warehouse floor operations"};
    app.set_version_flag("--version", std::string(kVersion));
    Globals g;
    app.add_option("--config", g.config_path, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--set", g.overrides, "Override, e.g. --set game.rounds=5 (repeatable)");
    app.add_flag("--full-scale", g.full_scale, "Start from the full-scale preset (1440 steps/day, 10 days, C = 20000)");
    app.add_option("--seed", g.seed, "First seed (run.seed)");
    app.add_option("--seeds", g.seeds, "Number of seeds in a batch (run.seeds)");
    app.add_option("--jobs", g.jobs, "Worker threads (run.jobs)");
    app.add_option("--output", g.output_root, "Output root (default: $MORL_OUTPUT_ROOT, then run.output)");
    app.add_option("--run-dir", g.run_dir, "Exact output directory");
    app.add_option("--verify", g.verify, "Check a run directory against its manifest and exit");

    auto* single = app.add_subcommand("single-objective", "lambda = 0 DQN training; curve.csv and checkpoint.qnet");

    auto* game = app.add_subcommand("repeated-game", "Learner vs regulator game");
    std::string env_kind = "warehouse", form_name = "lagrangian", fixture;
    game->add_option("--env", env_kind, "warehouse or tabular")->check(CLI::IsMember({"warehouse", "tabular"}));
    game->add_option("--form", form_name, "Tabular only: lagrangian or reformulated")
        ->check(CLI::IsMember({"lagrangian", "reformulated"}));
    game->add_option("--fixture", fixture, "Tabular only: .game file (default: random toy game from run.seed)");

    auto* extract = app.add_subcommand("extract", "Best single iterate of a finished repeated-game run");
    std::string run_in;
    std::optional<std::size_t> n_override;
    extract->add_option("--run", run_in, "repeated-game run directory")->required();
    extract->add_option("--n", n_override, "Episodes per iterate (default: required_samples, capped on the warehouse)");

    auto* testbed = app.add_subcommand("testbed", "Frank-Wolfe suite, cancellation demo and concentration harness");

    auto* evaluate = app.add_subcommand("evaluate", "KPI reports and the baseline comparison");
    std::string eval_run, checkpoint, baseline = "random";
    bool check = false;
    evaluate->add_option("--run", eval_run, "repeated-game run (or seed batch) to compare against the baselines");
    evaluate->add_option("--checkpoint", checkpoint, "Evaluate one saved Q-network");
    evaluate->add_option("--baseline", baseline, "random or unconstrained")
        ->check(CLI::IsMember({"random", "unconstrained"}));
    evaluate->add_flag("--check", check, "Exit nonzero unless the comparison pattern holds");

    app.require_subcommand(0, 1);
    CLI11_PARSE(app, argc, argv);

    try {
        if (!g.verify.empty()) return cmd_verify(g.verify);
        if (app.get_subcommands().empty()) {
            std::cerr << app.help();
            return 2;
        }
        const auto cfg = build_config(g);
        if (single->parsed()) return cmd_single_objective(cfg, resolve_run_dir(g, cfg, "single-objective"));
        if (game->parsed()) {
            if (env_kind == "tabular")
                return cmd_game_tabular(cfg, resolve_run_dir(g, cfg, "repeated-game-tabular"), fixture,
                                        form_name == "reformulated" ? GameForm::Reformulated : GameForm::Lagrangian);
            if (form_name != "lagrangian") throw ConfigError("--form reformulated needs --env tabular");
            return cmd_game_warehouse(cfg, resolve_run_dir(g, cfg, "repeated-game"));
        }
        if (extract->parsed()) {
            const auto out = g.run_dir.empty() ? (fs::path(run_in) / "extract").string() : g.run_dir;
            return cmd_extract(cfg, run_in, out, n_override);
        }
        if (testbed->parsed()) return cmd_testbed(cfg, resolve_run_dir(g, cfg, "testbed"));
        if (evaluate->parsed()) {
            const auto out = !g.run_dir.empty() ? g.run_dir
                             : !eval_run.empty() ? (fs::path(eval_run) / "evaluate").string()
                                                 : resolve_run_dir(g, cfg, "evaluate");
            return cmd_evaluate(cfg, out, eval_run, checkpoint, baseline, check);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
