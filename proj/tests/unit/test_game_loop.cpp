#include "morl/experiments.hpp"
#include "morl/game_loop.hpp"
#include "morl/testbed.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace morl;

namespace {

GameTrace exact_game(const TabularGame& g, std::size_t T, double grad_bound) {
    GameSettings gs;
    gs.rounds = T;
    gs.grad_bound = grad_bound;
    ExactBestResponder learner(g.mdp);
    ExactEvaluator evaluator(g.mdp);
    return run_repeated_game(gs, g.spec, learner, evaluator);
}

} // namespace

TEST_CASE("one round with lambda 0 is the unconstrained optimum") {
    const auto g = toy_game(3);
    const auto trace = exact_game(g, 1, 1.0);
    REQUIRE(trace.size() == 1);
    const double opt = backward_induction(g.mdp, g.mdp.rewards[0]).value;
    CHECK(trace.rounds[0].lagrangian == doctest::Approx(opt + 0.0));
    CHECK(trace.rounds[0].values[0] == doctest::Approx(opt));
    CHECK(trace.rounds[0].lambda.lambda[0] == 0.0);
}

TEST_CASE("lambda-bar is the running mean of the played multipliers") {
    const auto g = toy_game(5);
    const auto trace = exact_game(g, 30, 1.0);
    std::vector<double> sum(g.spec.size(), 0.0);
    for (std::size_t t = 0; t < trace.size(); ++t) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += trace.rounds[t].lambda.lambda[i];
            CHECK(trace.rounds[t].lambda_bar.lambda[i] == doctest::Approx(sum[i] / (t + 1)).epsilon(1e-12));
        }
        CHECK(trace.rounds[t].lambda.l1() <= g.spec.cap + 1e-12);
        if (t > 0) CHECK(trace.rounds[t].lambda == trace.rounds[t - 1].lambda_next);
    }
}

TEST_CASE("exact game reaches the minimax value of the toy game") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto g = toy_game(seed);
        ExperimentConfig cfg;
        cfg.game.rounds = 400;
        const auto run = run_tabular_game(g, GameForm::Lagrangian, cfg);
        REQUIRE(run.gaps);
        const double L_star = brute_force_lagrangian_value(g.mdp, g.spec, 20000);
        // theory: both gaps <= D G / sqrt(T)
        CHECK(run.gaps->upper >= -1e-9);
        CHECK(run.gaps->lower >= -1e-9);
        CHECK(std::abs(run.gaps->value - L_star) <= run.gaps->max() + 1e-3);
    }
}

TEST_CASE("mixture evaluation") {
    const auto g = toy_game(4);
    const auto trace = exact_game(g, 6, 1.0);
    TabularEnv env(g.mdp);
    const auto one = evaluate_mixture(trace, 1, env, 4000, 3);
    const auto v1 = exact_values(g.mdp, *std::dynamic_pointer_cast<const TabularPolicy>(trace.policies[0]));
    for (std::size_t i = 0; i < v1.size(); ++i) CHECK(std::abs(one.v[i] - v1[i]) <= 3.0 * one.std_error[i] + 1e-12);

    // two members with exactly known values
    const auto a = TabularPolicy::deterministic(3, 2, 3, std::vector<std::size_t>(9, 0));
    const auto b = TabularPolicy::deterministic(3, 2, 3, std::vector<std::size_t>(9, 1));
    const auto va = exact_values(g.mdp, a), vb = exact_values(g.mdp, b);
    const auto est = estimate_values(env, PolicyMixture::uniform({std::make_shared<TabularPolicy>(a), std::make_shared<TabularPolicy>(b)}),
                                     20000, 8);
    for (std::size_t i = 0; i < va.size(); ++i)
        CHECK(std::abs(est.v[i] - 0.5 * (va[i] + vb[i])) <= 3.0 * est.std_error[i]);
    CHECK_THROWS_AS(evaluate_mixture(trace, 7, env, 10, 1), ContractError);
}

TEST_CASE("rounds CSV has one row per round") {
    const auto g = toy_game(6);
    const auto trace = exact_game(g, 2, 1.0);
    std::stringstream ss;
    write_rounds_csv(ss, trace);
    std::string line;
    int rows = -1;
    while (std::getline(ss, line)) ++rows;
    CHECK(rows == 2);
}

TEST_CASE("feasible count") {
    const auto g = toy_game(2);
    const auto trace = exact_game(g, 50, 1.0);
    std::size_t n = 0;
    for (std::size_t t = 0; t < trace.size(); ++t) {
        n += trace.rounds[t].feasible ? 1 : 0;
        CHECK(trace.feasible_count(t + 1) == n);
        const auto& s = trace.rounds[t].slack;
        CHECK(trace.rounds[t].feasible == std::all_of(s.begin(), s.end(), [](double x) { return x >= 0.0; }));
    }
}

TEST_CASE("regret of the regulator stays below D G sqrt(T)") {
    const auto g = toy_game(8);
    const std::size_t T = 200;
    const double G = 3.0; // |slack| <= H for rewards in [0, 1] and alpha in [0, H]
    const auto trace = exact_game(g, T, G);
    const auto losses = trace.losses();
    const double regret = realized_regret(losses, g.spec.cap);
    CHECK(regret <= lambda_diameter(g.spec) * G * std::sqrt(static_cast<double>(T)) + 1e-9);
}

TEST_CASE("lambda-bar Lagrangian of the running mixture on the toy game") {
    const auto g = toy_game(1);
    const std::size_t T = 200;
    const auto trace = exact_game(g, T, 3.0);
    const auto lb = trace.lambda_bar();
    std::vector<double> running;
    std::vector<double> sum(g.mdp.objectives(), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += trace.rounds[t].values[i];
        std::vector<double> avg(sum.size());
        for (std::size_t i = 0; i < sum.size(); ++i) avg[i] = sum[i] / (t + 1);
        running.push_back(lagrangian(avg, lb.lambda, g.spec));
    }
    std::size_t drops = 0;
    double worst = 0.0;
    for (std::size_t t = 1; t < T; ++t)
        if (running[t] < running[t - 1]) {
            ++drops;
            worst = std::max(worst, running[t - 1] - running[t]);
        }
    MESSAGE("decreasing steps: " << drops << ", largest drop " << worst);
    CHECK(running.back() >= running.front());
    CHECK(running.back() >= running[T / 2]);
    CHECK(worst <= 1e-3);
}
