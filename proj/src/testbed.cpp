#include "morl/testbed.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace morl {

TabularGame read_tabular_game(std::istream& in, std::string name) {
    TabularGame g;
    g.name = std::move(name);
    g.mdp = read_tabular_mdp(in);
    std::string word;
    auto next = [&]() -> std::string {
        while (in >> word) {
            if (word.front() == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return word;
        }
        return {};
    };
    auto number = [&]() {
        const auto w = next();
        try {
            return std::stod(w);
        } catch (const std::exception&) {
            throw ConfigError("game file: expected a number, found '" + w + "'");
        }
    };
    if (next() != "constraints") throw ConfigError("game file: missing constraints block");
    const auto m = static_cast<std::size_t>(number());
    if (next() != "cap") throw ConfigError("game file: expected 'cap'");
    g.spec.cap = number();
    if (next() != "alpha") throw ConfigError("game file: expected 'alpha'");
    g.spec.alpha.resize(m);
    for (auto& a : g.spec.alpha) a = number();
    if (next() != "sign") throw ConfigError("game file: expected 'sign'");
    g.spec.sign.resize(m);
    for (auto& s : g.spec.sign) s = number();
    for (std::size_t i = 0; i < m; ++i) g.spec.labels.push_back("c" + std::to_string(i + 1));
    for (auto tail = next(); !tail.empty(); tail = next()) {
        if (tail == "lambda")
            g.lambda = number();
        else if (tail == "min_violation")
            g.min_violation = number();
        else
            throw ConfigError("game file: unexpected '" + tail + "'");
    }
    if (g.mdp.objectives() != m + 1) throw ConfigError("game file: need one reward table per constraint plus the objective");
    try {
        g.spec.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("game file: ") + e.what());
    }
    return g;
}

void write_tabular_game(std::ostream& out, const TabularGame& game) {
    write_tabular_mdp(out, game.mdp);
    const auto old = out.precision(17);
    out << "constraints " << game.spec.size() << " cap " << game.spec.cap << "\nalpha";
    for (double a : game.spec.alpha) out << ' ' << a;
    out << "\nsign";
    for (double s : game.spec.sign) out << ' ' << s;
    out << '\n';
    if (game.lambda) out << "lambda " << *game.lambda << '\n';
    if (game.min_violation) out << "min_violation " << *game.min_violation << '\n';
    out.precision(old);
}

TabularGame load_tabular_game(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open game file: " + path);
    return read_tabular_game(in, std::filesystem::path(path).stem().string());
}

std::vector<TabularGame> load_tabular_games(const std::string& dir, const std::string& prefix) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("fixture directory not found: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto stem = e.path().stem().string();
        if (e.path().extension() == ".game" && stem.rfind(prefix, 0) == 0) paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<TabularGame> out;
    for (const auto& p : paths) out.push_back(load_tabular_game(p));
    return out;
}

ConstraintSpec midpoint_constraints(const TabularMDP& mdp, double cap) {
    const auto opt = backward_induction(mdp, mdp.rewards[0]).policy;
    const auto v_opt = exact_values(mdp, opt);
    std::vector<double> alpha;
    for (std::size_t i = 1; i < mdp.objectives(); ++i) {
        RewardTable neg = mdp.rewards[i];
        for (auto& x : neg) x = -x;
        const double v_min = exact_values(mdp, backward_induction(mdp, neg).policy)[i];
        alpha.push_back(0.5 * (v_min + v_opt[i]));
    }
    return ConstraintSpec::upper_bounds(std::move(alpha), cap);
}

TabularGame toy_game(std::uint64_t seed, double cap) {
    TabularGame g;
    g.name = "toy_" + std::to_string(seed);
    g.mdp = random_tabular_mdp(3, 2, 3, 2, seed);
    g.spec = midpoint_constraints(g.mdp, cap);
    return g;
}

double vertex_pair_oracle(const TabularMDP& mdp, double lambda, const ConstraintSpec& spec) {
    if (spec.size() != 1) throw UnsupportedError("vertex_pair_oracle: one constraint only");
    const std::size_t cells = mdp.n_states * mdp.horizon;
    std::size_t total = 1;
    for (std::size_t i = 0; i < cells; ++i) {
        total *= mdp.n_actions;
        if (total > 4096) throw UnsupportedError("vertex_pair_oracle: instance too large");
    }
    // (V_0, signed constraint value) of every deterministic non-stationary policy
    std::vector<std::pair<double, double>> vertex;
    std::vector<std::size_t> choice(cells);
    for (std::size_t k = 0; k < total; ++k) {
        std::size_t x = k;
        for (auto& c : choice) {
            c = x % mdp.n_actions;
            x /= mdp.n_actions;
        }
        const auto v = exact_values(mdp, TabularPolicy::deterministic(mdp.n_states, mdp.n_actions, mdp.horizon, choice));
        vertex.emplace_back(v[0], spec.sign[0] * v[1]);
    }
    const double a = spec.alpha[0];
    auto L = [&](double v0, double c) { return v0 - lambda * std::max(0.0, c - a); };
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [v0, c] : vertex) best = std::max(best, L(v0, c));
    for (std::size_t i = 0; i < vertex.size(); ++i)
        for (std::size_t j = i + 1; j < vertex.size(); ++j) {
            const double dc = vertex[j].second - vertex[i].second;
            if (dc == 0.0) continue;
            const double th = (a - vertex[i].second) / dc;
            if (th <= 0.0 || th >= 1.0) continue;
            best = std::max(best, vertex[i].first + th * (vertex[j].first - vertex[i].first));
        }
    return best;
}

std::vector<FwSuiteRow> run_fw_suite(const std::vector<TabularGame>& games, std::size_t max_iterations,
                                     double eps) {
    std::vector<FwSuiteRow> rows;
    for (const auto& g : games) {
        if (!g.lambda) throw ConfigError("fw suite: fixture " + g.name + " has no lambda");
        FwSuiteRow row;
        row.name = g.name;
        row.lambda = *g.lambda;
        const auto res = fw_best_response(g.mdp, row.lambda, g.spec, max_iterations, eps);
        row.iterations = res.iterations;
        row.gap = res.gap;
        row.value = res.value;
        row.max_flow_residual = flow_residual(g.mdp, res.x);
        row.oracle = g.spec.size() == 1 ? vertex_pair_oracle(g.mdp, row.lambda, g.spec)
                                        : reformulated_max(g.mdp, row.lambda, g.spec);
        row.pass = row.gap <= eps && std::abs(row.oracle - row.value) <= eps && row.max_flow_residual <= 1e-9;
        rows.push_back(row);
    }
    return rows;
}

void write_fw_suite_csv(std::ostream& out, const std::vector<FwSuiteRow>& rows) {
    out << "fixture,lambda,iterations,gap,L,oracle,flow_residual,pass\n";
    const auto old = out.precision(12);
    for (const auto& r : rows)
        out << r.name << ',' << r.lambda << ',' << r.iterations << ',' << r.gap << ',' << r.value << ','
            << r.oracle << ',' << r.max_flow_residual << ',' << (r.pass ? 1 : 0) << '\n';
    out.precision(old);
}

double clopper_pearson_lower(std::size_t k, std::size_t n, double confidence) {
    if (n == 0 || k > n) throw ValidationError("clopper_pearson_lower: need 0 <= k <= n, n > 0");
    if (k == 0) return 0.0;
    return boost::math::ibeta_inv(static_cast<double>(k), static_cast<double>(n - k + 1), 1.0 - confidence);
}

ConcentrationResult run_concentration(const TabularGame& game, const std::vector<TabularPolicy>& iterates,
                                      double lambda_bar, double epsilon, double delta,
                                      std::size_t repetitions, std::uint64_t seed, std::size_t jobs) {
    if (iterates.empty() || repetitions == 0) throw ValidationError("concentration: need iterates and repetitions");
    ConcentrationResult r;
    r.repetitions = repetitions;
    r.target = 1.0 - delta;
    r.n = required_samples(lambda_bar, static_cast<double>(game.mdp.horizon), epsilon, delta, iterates.size());

    std::vector<double> exact;
    std::vector<PolicyMixture> mixes;
    for (const auto& pi : iterates) {
        const auto v = exact_values(game.mdp, pi);
        exact.push_back(reformulated_lagrangian(v[0], positive_part_violation(v, game.spec).g_plus, lambda_bar));
        mixes.emplace_back(std::make_shared<TabularPolicy>(pi));
    }
    TabularEnv env(game.mdp);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        const auto sel = select_best_iterate(mixes, lambda_bar, game.spec, env, r.n, derive_seed(seed, rep), jobs);
        double dev = 0.0;
        for (std::size_t t = 0; t < exact.size(); ++t) dev = std::max(dev, std::abs(sel.table[t].l_hat - exact[t]));
        r.max_deviation = std::max(r.max_deviation, dev);
        if (dev <= epsilon) ++r.successes;
    }
    r.coverage_lower = clopper_pearson_lower(r.successes, r.repetitions);
    return r;
}

void write_concentration_csv(std::ostream& out, const ConcentrationResult& r) {
    out << "repetitions,successes,n,coverage,coverage_lower95,target,max_deviation,pass\n";
    const auto old = out.precision(12);
    out << r.repetitions << ',' << r.successes << ',' << r.n << ',' << r.coverage() << ',' << r.coverage_lower
        << ',' << r.target << ',' << r.max_deviation << ',' << (r.pass() ? 1 : 0) << '\n';
    out.precision(old);
}

CancellationReport left_right_cancellation(const TabularGame& game) {
    const auto& mdp = game.mdp;
    if (mdp.n_states != 3 || mdp.n_actions != 3) throw ConfigError("cancellation: expected the 3-state line MDP");
    const std::size_t cells = mdp.n_states * mdp.horizon;
    const auto left = TabularPolicy::deterministic(3, 3, mdp.horizon, std::vector<std::size_t>(cells, 1));
    const auto right = TabularPolicy::deterministic(3, 3, mdp.horizon, std::vector<std::size_t>(cells, 2));
    return cancellation_report(mdp, game.spec, {left, right}, {0.5, 0.5});
}

CancellationReport left_right_cancellation(std::size_t horizon) {
    return left_right_cancellation(TabularGame{"safe_left_right", safe_left_right_mdp(horizon),
                                               safe_left_right_constraints(10.0), std::nullopt, std::nullopt});
}

void write_cancellation_csv(std::ostream& out, const CancellationReport& r) {
    out << "member,v0,signal,neg_signal,g_plus\n";
    const auto old = out.precision(12);
    const char* names[] = {"left", "right"};
    for (std::size_t k = 0; k < r.member_values.size(); ++k) {
        out << (k < 2 ? names[k] : std::to_string(k).c_str());
        for (double v : r.member_values[k]) out << ',' << v;
        out << ',' << r.member_positive_part[k] << '\n';
    }
    out << "mixture_signed_violation," << r.mixture_signed_violation << ",,,\n";
    out.precision(old);
}

} // namespace morl
