#include "morl/eval_bench.hpp"
#include "morl/env_sim.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace morl;
using namespace morl::sim;

namespace {

GameTrace flagged_trace(const std::vector<bool>& feasible, const std::vector<double>& objective = {}) {
    GameTrace tr;
    tr.spec = ConstraintSpec::upper_bounds({1.0}, 1.0);
    for (std::size_t t = 0; t < feasible.size(); ++t) {
        RoundRecord r;
        r.round = t + 1;
        r.feasible = feasible[t];
        const double v0 = objective.empty() ? 1.0 : objective[t];
        r.values = ValueVector::exact({v0, feasible[t] ? 0.0 : 2.0});
        r.slack = {feasible[t] ? 1.0 : -1.0};
        tr.rounds.push_back(r);
        tr.policies.push_back(std::make_shared<ConstantPolicy>(0));
    }
    return tr;
}

} // namespace

TEST_CASE("always-ignore leaves ETPH at zero and the queue slacks at alpha") {
    const auto spec = desk_constraints();
    WarehouseEnv env(desk_config(), spec);
    const std::vector<std::uint64_t> seeds{1, 2};
    const auto rep = evaluate_policy(env, std::make_shared<ConstantPolicy>(Action{}.index()), spec, 2, seeds);
    CHECK(rep.etph == 0.0);
    CHECK(rep.slack[2] == spec.alpha[2]);
    CHECK(rep.slack[3] == spec.alpha[3]);
    CHECK(rep.labels == spec.labels);
    CHECK(rep.seed_etph.size() == 2);
}

TEST_CASE("evaluation is deterministic") {
    const auto spec = desk_constraints();
    WarehouseEnv env(desk_config(), spec);
    const std::vector<std::uint64_t> seeds{3, 4};
    auto pol = std::make_shared<UniformRandomPolicy>(env.action_count());
    const auto a = evaluate_policy(env, pol, spec, 2, seeds, 1);
    const auto b = evaluate_policy(env, pol, spec, 2, seeds, 2);
    CHECK(a.etph == b.etph);
    CHECK(a.slack == b.slack);
    CHECK(a.seed_etph == b.seed_etph);
    CHECK(a.feasible == b.feasible);
}

TEST_CASE("random baseline plays each action with frequency 1/8") {
    SimConfig c = desk_config();
    c.floor_max = 1;
    c.steps_per_day = 10000;
    c.n_days = 1;
    WarehouseEnv env(c, desk_constraints());
    const auto pol = make_baseline(BaselineKind::Random, env, desk_constraints(), LearnerConfig{});
    const auto traj = rollout(env, PolicyMixture(pol), 42);
    REQUIRE(traj.steps.size() == 10000);
    std::vector<double> count(8, 0.0);
    for (const auto& s : traj.steps) count[s.action] += 1.0;
    const double p = 1.0 / 8.0, n = 10000.0;
    const double band = 3.0 * std::sqrt(n * p * (1 - p));
    for (double k : count) CHECK(std::abs(k - n * p) <= band);

    // same seed, same stream
    const auto again = rollout(env, PolicyMixture(pol), 42);
    for (std::size_t t = 0; t < traj.steps.size(); ++t) REQUIRE(traj.steps[t].action == again.steps[t].action);
}

TEST_CASE("cumulative feasible counts") {
    SUBCASE("rounds 3 and 5") {
        const auto curves = count_feasible_rounds(std::vector<std::vector<bool>>{{false, false, true, false, true, false}});
        CHECK(curves.per_seed[0] == std::vector<std::size_t>{0, 0, 1, 1, 2, 2});
        CHECK(curves.mean == std::vector<double>{0, 0, 1, 1, 2, 2});
    }
    SUBCASE("all infeasible") {
        const auto curves = count_feasible_rounds(std::vector<std::vector<bool>>{{false, false}, {false, false}});
        CHECK(curves.best == std::vector<double>{0, 0});
        CHECK(curves.worst == std::vector<double>{0, 0});
        CHECK(curves.median == std::vector<double>{0, 0});
    }
    SUBCASE("statistics across seeds and padding") {
        const auto curves = count_feasible_rounds(
            std::vector<std::vector<bool>>{{true, true, true}, {false, true, false}, {true}});
        CHECK(curves.best == std::vector<double>{1, 2, 3});
        CHECK(curves.worst == std::vector<double>{0, 1, 1});
        CHECK(curves.median == std::vector<double>{1, 1, 1});
        CHECK(curves.mean[2] == doctest::Approx(5.0 / 3.0));
    }
    SUBCASE("from traces") {
        const auto curves = count_feasible_rounds(std::vector<GameTrace>{flagged_trace({false, true})});
        CHECK(curves.per_seed[0] == std::vector<std::size_t>{0, 1});
    }
}

TEST_CASE("best feasible selection") {
    CHECK_FALSE(select_best_feasible(flagged_trace({false, false})).has_value());
    const auto pick = select_best_feasible(flagged_trace({true, false, true}, {1.0, 9.0, 2.0}));
    REQUIRE(pick);
    CHECK(*pick == 2);
}

TEST_CASE("normal confidence interval") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const auto ci = normal_ci(x);
    const double sd = std::sqrt(5.0 / 3.0);
    CHECK(ci.mean == 2.5);
    CHECK(ci.half_width == doctest::Approx(1.959963984540054 * sd / 2.0));
    CHECK(ci.lo() < ci.mean);
}

TEST_CASE("comparison writers") {
    KPIReport r;
    r.etph = 2.0;
    r.slack = {0.1, -1.0};
    r.labels = {"a", "b"};
    r.seed_etph = {2.0};
    r.seed_slack = {{0.1, -1.0}};
    const auto col = summarize_column("X", {r, r});
    CHECK(col.seeds == 2);
    CHECK_FALSE(col.feasible());
    std::ostringstream csv, txt;
    write_comparison_csv(csv, {col});
    write_comparison_text(txt, {col});
    CHECK(csv.str().rfind("column,etph_mean,etph_lo,etph_hi,slack_a,slack_b", 0) == 0);
    CHECK(txt.str().find("X") != std::string::npos);
}
