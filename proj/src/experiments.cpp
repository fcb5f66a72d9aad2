#include "morl/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;

namespace morl {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

double to_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": bad number '" + s + "'");
    }
}

/// Largest l2 norm of the slack vector over deterministic policies, from the
/// extreme values of each constraint signal.
double slack_bound(const TabularMDP& mdp, const ConstraintSpec& spec) {
    double sq = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        RewardTable neg = mdp.rewards[i + 1];
        for (auto& x : neg) x = -x;
        const double hi = backward_induction(mdp, mdp.rewards[i + 1]).value;
        const double lo = -backward_induction(mdp, neg).value;
        const double a = spec.alpha[i], s = spec.sign[i];
        const double worst = std::max(std::abs(a - s * hi), std::abs(a - s * lo));
        sq += worst * worst;
    }
    return std::sqrt(sq);
}

} // namespace

sim::WarehouseEnv make_warehouse(const ExperimentConfig& cfg) { return {cfg.sim, cfg.constraints()}; }

SingleObjectiveRun run_single_objective(const ExperimentConfig& cfg, std::uint64_t seed) {
    auto env = make_warehouse(cfg);
    LearnerConfig lc = cfg.learner;
    lc.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    SingleObjectiveRun run;
    run.result = train_best_response(env, ScalarizedSpec::unconstrained(env.constraints(), env.horizon()), lc);
    run.seconds = seconds_since(t0);
    return run;
}

double curve_improvement(const std::vector<CurvePoint>& curve, std::size_t window) {
    if (window == 0 || curve.size() < window) throw ValidationError("curve_improvement: curve shorter than the window");
    double first = 0.0, last = 0.0;
    for (std::size_t k = 0; k < window; ++k) {
        first += curve[k].scalarized_return;
        last += curve[curve.size() - window + k].scalarized_return;
    }
    first /= static_cast<double>(window);
    last /= static_cast<double>(window);
    if (first == 0.0) return last > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return (last - first) / std::abs(first);
}

WarehouseGameRun run_warehouse_game(const ExperimentConfig& cfg, std::uint64_t seed,
                                    const std::string& checkpoint_dir, const RoundObserver& observer) {
    auto env = make_warehouse(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    DqnResponder learner(env, cfg.game_learner(seed), seed, checkpoint_dir, cfg.hash());
    MonteCarloEvaluator evaluator(env, cfg.n_eval, seed, cfg.jobs);
    WarehouseGameRun run;
    run.trace = run_repeated_game(cfg.game, env.constraints(), learner, evaluator, observer);
    run.curves = learner.curves();
    run.seconds = seconds_since(t0);
    return run;
}

void write_round_curves_csv(std::ostream& out, const std::vector<std::vector<CurvePoint>>& curves) {
    out << "round,episode,scalarized_return";
    const std::size_t dim = curves.empty() || curves[0].empty() ? 0 : curves[0][0].returns.size();
    for (std::size_t i = 0; i < dim; ++i) out << ",r_" << i;
    out << '\n';
    const auto old = out.precision(12);
    for (std::size_t t = 0; t < curves.size(); ++t)
        for (const auto& p : curves[t]) {
            out << t + 1 << ',' << p.episode << ',' << p.scalarized_return;
            for (double r : p.returns) out << ',' << r;
            out << '\n';
        }
    out.precision(old);
}

void write_lambdas_csv(std::ostream& out, const GameTrace& trace) {
    const std::size_t m = trace.spec.size();
    out << "round";
    for (std::size_t i = 1; i <= m; ++i) out << ",lambda_" << i;
    for (std::size_t i = 1; i <= m; ++i) out << ",lambda_bar_" << i;
    out << ",l1\n";
    const auto old = out.precision(12);
    for (const auto& r : trace.rounds) {
        out << r.round;
        for (double l : r.lambda.lambda) out << ',' << l;
        for (double l : r.lambda_bar.lambda) out << ',' << l;
        out << ',' << r.lambda.l1() << '\n';
    }
    out.precision(old);
}

GameTrace load_game_run(const std::string& dir, const ConstraintSpec& spec) {
    const auto path = (fs::path(dir) / "rounds.csv").string();
    std::ifstream in(path);
    if (!in) throw ConfigError("missing " + path);
    std::string line;
    std::getline(in, line);
    const std::size_t m = spec.size();
    const std::size_t cols = 2 + 3 * m + 2;
    if (split_csv(line).size() != cols) throw ConfigError(path + ": header does not match the constraint count");
    GameTrace trace;
    trace.spec = spec;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv(line);
        if (c.size() != cols) throw ConfigError(path + ": malformed row");
        RoundRecord r;
        r.round = static_cast<std::size_t>(to_double(c[0], path));
        r.values.v.assign(m + 1, 0.0);
        r.values.v[0] = to_double(c[1], path);
        for (std::size_t i = 0; i < m; ++i) {
            r.slack.push_back(to_double(c[2 + i], path));
            r.lambda.lambda.push_back(to_double(c[2 + m + i], path));
            r.lambda_bar.lambda.push_back(to_double(c[2 + 2 * m + i], path));
        }
        r.lagrangian = to_double(c[2 + 3 * m], path);
        r.feasible = c[3 + 3 * m] == "1";
        char id[32];
        std::snprintf(id, sizeof id, "round_%03zu", r.round);
        r.policy_id = id;
        const auto ckpt = (fs::path(dir) / "checkpoints" / (std::string(id) + ".qnet")).string();
        if (!fs::exists(ckpt)) throw ConfigError("missing checkpoint " + ckpt);
        trace.policies.push_back(std::make_shared<GreedyQPolicy>(std::make_shared<const Mlp>(load_checkpoint(ckpt))));
        trace.rounds.push_back(std::move(r));
    }
    if (trace.rounds.empty()) throw ConfigError(path + ": no rounds");
    return trace;
}

SeedComparison compare_seed(const ExperimentConfig& cfg, std::uint64_t seed, const GameTrace& trace) {
    auto env = make_warehouse(cfg);
    const auto& spec = env.constraints();
    SeedComparison out;
    out.seed = seed;
    const std::uint64_t eval_seeds[] = {derive_seed(seed, 99)};
    out.best_round = select_best_feasible(trace, env, cfg.confirm_episodes, derive_seed(seed, 7), cfg.jobs);
    if (out.best_round)
        out.morl = evaluate_policy(env, trace.policies[*out.best_round], spec, cfg.report_episodes, eval_seeds, cfg.jobs);
    const auto lc = cfg.baseline_learner(seed);
    out.unconstrained = evaluate_policy(env, make_baseline(BaselineKind::Unconstrained, env, spec, lc), spec,
                                        cfg.report_episodes, eval_seeds, cfg.jobs);
    out.random = evaluate_policy(env, make_baseline(BaselineKind::Random, env, spec, lc), spec,
                                 cfg.report_episodes, eval_seeds, cfg.jobs);
    return out;
}

ComparisonVerdict summarize_comparison(const std::vector<SeedComparison>& seeds) {
    if (seeds.empty()) throw ValidationError("summarize_comparison: no seeds");
    std::vector<KPIReport> unc, morl, rnd;
    for (const auto& s : seeds) {
        unc.push_back(s.unconstrained);
        rnd.push_back(s.random);
        if (s.morl) morl.push_back(*s.morl);
    }
    ComparisonVerdict v;
    v.morl_seeds = morl.size();
    const auto cu = summarize_column("Unconstrained", unc);
    const auto cr = summarize_column("Random", rnd);
    const auto it = std::find(cu.labels.begin(), cu.labels.end(), "Manual Cap.");
    const std::size_t manual = it == cu.labels.end() ? 0 : static_cast<std::size_t>(it - cu.labels.begin());
    v.baselines_violate = cu.slack[manual] < 0.0 && cr.slack[manual] < 0.0;
    if (morl.empty()) {
        v.columns = {cu, cr};
        return v;
    }
    const auto cm = summarize_column("MORL", morl);
    v.columns = {cu, cm, cr};
    v.ordered = cu.etph.mean > cm.etph.mean && cm.etph.mean > cr.etph.mean;
    v.separated = cu.etph.lo() > cm.etph.hi() && cm.etph.lo() > cr.etph.hi();
    v.morl_feasible = cm.feasible();
    return v;
}

void write_seed_kpis_csv(std::ostream& out, const std::vector<SeedComparison>& seeds) {
    out << "seed,policy,best_round,etph";
    const auto& labels = seeds.empty() ? std::vector<std::string>{} : seeds[0].unconstrained.labels;
    for (const auto& l : labels) out << ",slack_" << l;
    out << ",feasible\n";
    const auto old = out.precision(12);
    auto row = [&](std::uint64_t seed, const char* name, std::string round, const KPIReport& r) {
        out << seed << ',' << name << ',' << round << ',' << r.etph;
        for (double g : r.slack) out << ',' << g;
        out << ',' << (r.feasible ? 1 : 0) << '\n';
    };
    for (const auto& s : seeds) {
        row(s.seed, "Unconstrained", "", s.unconstrained);
        if (s.morl) row(s.seed, "MORL", std::to_string(*s.best_round + 1), *s.morl);
        row(s.seed, "Random", "", s.random);
    }
    out.precision(old);
}

// *************************************************************************************

TabularGameRun run_tabular_game(const TabularGame& game, GameForm form, const ExperimentConfig& cfg) {
    TabularGameRun run;
    run.form = form;
    const double G = slack_bound(game.mdp, game.spec);
    if (form == GameForm::Lagrangian) {
        GameSettings gs;
        gs.rounds = cfg.game.rounds;
        gs.grad_bound = G;
        ExactBestResponder learner(game.mdp);
        ExactEvaluator evaluator(game.mdp);
        const auto trace = run_repeated_game(gs, game.spec, learner, evaluator);
        for (std::size_t t = 0; t < trace.size(); ++t) {
            run.policies.push_back(*std::dynamic_pointer_cast<const TabularPolicy>(trace.policies[t]));
            run.values.push_back(trace.rounds[t].values.v);
            run.lambdas.push_back(trace.rounds[t].lambda.lambda);
        }
        run.lambda_bar = trace.lambda_bar().lambda;
        run.gaps = minimax_gaps(game.mdp, trace);
    } else {
        ReformGameSettings rs;
        rs.rounds = cfg.game.rounds;
        rs.grad_bound = G;
        rs.fw_iterations = cfg.fw_iterations;
        rs.fw_eps = cfg.fw_eps;
        const auto trace = run_reformulated_game(game.mdp, game.spec, rs);
        for (const auto& r : trace.rounds) {
            run.policies.push_back(r.policy);
            run.values.push_back(r.values);
            run.lambdas.push_back({r.lambda});
        }
        run.lambda_bar = {trace.lambda_bar()};
    }
    run.scalar_lambda_bar = std::accumulate(run.lambda_bar.begin(), run.lambda_bar.end(), 0.0);
    return run;
}

void write_tabular_rounds_csv(std::ostream& out, const TabularGameRun& run) {
    out << "round";
    const std::size_t k = run.lambdas.empty() ? 0 : run.lambdas[0].size();
    const std::size_t dim = run.values.empty() ? 0 : run.values[0].size();
    for (std::size_t i = 1; i <= k; ++i) out << ",lambda_" << i;
    for (std::size_t i = 0; i < dim; ++i) out << ",V_" << i;
    out << '\n';
    const auto old = out.precision(17);
    for (std::size_t t = 0; t < run.policies.size(); ++t) {
        out << t + 1;
        for (double l : run.lambdas[t]) out << ',' << l;
        for (double v : run.values[t]) out << ',' << v;
        out << '\n';
    }
    out.precision(old);
}

double brute_force_lagrangian_value(const TabularMDP& mdp, const ConstraintSpec& spec, std::size_t steps) {
    if (spec.size() != 1) throw UnsupportedError("brute_force_lagrangian_value: one constraint only");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= steps; ++k) {
        const LagrangeWeights lam{{spec.cap * static_cast<double>(k) / static_cast<double>(steps)}};
        best = std::min(best, best_response_value(mdp, spec, lam));
    }
    return best;
}

// *************************************************************************************

WarehouseExtraction extract_warehouse(const ExperimentConfig& cfg, const GameTrace& trace, std::uint64_t seed) {
    auto env = make_warehouse(cfg);
    WarehouseExtraction x;
    x.lambda_bar = bridge_lambda(trace.lambda_bar());
    x.required = required_samples(x.lambda_bar, static_cast<double>(env.horizon()), cfg.epsilon, cfg.delta,
                                  trace.size());
    x.used = static_cast<std::size_t>(std::min<std::uint64_t>(x.required, cfg.max_samples));
    std::vector<PolicyMixture> iterates;
    for (const auto& p : trace.policies) iterates.emplace_back(p);
    x.selection = select_best_iterate(iterates, x.lambda_bar, env.constraints(), env, x.used, seed, cfg.jobs);
    return x;
}

void write_warehouse_extraction(std::ostream& out, const ExperimentConfig& cfg, const WarehouseExtraction& x) {
    const auto old = out.precision(12);
    out << "epsilon " << cfg.epsilon << " delta " << cfg.delta << " lambda_bar " << x.lambda_bar << '\n'
        << "required_samples " << x.required << '\n'
        << "samples_used " << x.used << '\n';
    if (x.used < x.required)
        out << "note: sample count capped by extract.max_samples; signals are not in [0, 1], so the "
               "Hoeffding guarantee does not apply to this run\n";
    out << "t_star " << x.selection.t_star << '\n';
    for (const auto& e : x.selection.table)
        out << "round " << e.round << " V0_hat " << e.v[0] << " g_hat " << e.g_hat << " L_hat " << e.l_hat << '\n';
    out.precision(old);
}

} // namespace morl
