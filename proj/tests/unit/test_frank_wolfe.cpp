#include "morl/frank_wolfe.hpp"
#include "morl/testbed.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace morl;

namespace {

std::vector<TabularPolicy> all_deterministic(const TabularMDP& mdp) {
    const std::size_t cells = mdp.n_states * mdp.horizon;
    std::size_t total = 1;
    for (std::size_t i = 0; i < cells; ++i) total *= mdp.n_actions;
    std::vector<TabularPolicy> out;
    std::vector<std::size_t> choice(cells);
    for (std::size_t k = 0; k < total; ++k) {
        std::size_t x = k;
        for (auto& c : choice) {
            c = x % mdp.n_actions;
            x /= mdp.n_actions;
        }
        out.push_back(TabularPolicy::deterministic(mdp.n_states, mdp.n_actions, mdp.horizon, choice));
    }
    return out;
}

double dot(const RewardTable& r, const std::vector<double>& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * d[i];
    return s;
}

} // namespace

TEST_CASE("step schedule") {
    // an instance whose optimum sits on the kink keeps iterating
    FwResult res;
    for (std::uint64_t s = 1; s < 50; ++s) {
        const auto g = toy_game(s);
        res = fw_best_response(g.mdp, 2.0, g.spec, 5, 1e-12);
        if (res.log.size() >= 4) break;
    }
    REQUIRE(res.log.size() >= 4);
    for (const auto& it : res.log)
        if (it.step > 0.0) CHECK(it.step == doctest::Approx(2.0 / (1.0 + static_cast<double>(it.w))));
    bool saw_three = false;
    for (const auto& it : res.log)
        if (it.w == 3) {
            saw_three = true;
            CHECK(it.step == 0.5);
        }
    CHECK(saw_three);
}

TEST_CASE("lambda 0 terminates after one LMO call") {
    const auto g = toy_game(2);
    const auto res = fw_best_response(g.mdp, 0.0, g.spec, 100, 1e-9);
    CHECK(res.iterations <= 2);
    CHECK(res.gap <= 1e-12);
    CHECK(res.value == doctest::Approx(backward_induction(g.mdp, g.mdp.rewards[0]).value).epsilon(1e-12));
}

TEST_CASE("supergradient cases") {
    const auto g = toy_game(3);
    const auto unif = occupancy_of_policy(g.mdp, TabularPolicy::uniform(3, 2, 3));
    ConstraintSpec loose = g.spec;
    loose.alpha = {100.0};
    CHECK(supergradient(g.mdp, unif, 2.0, loose) == g.mdp.rewards[0]);

    ConstraintSpec tight = g.spec;
    tight.alpha = {-100.0};
    const auto sg = supergradient(g.mdp, unif, 2.0, tight);
    for (std::size_t k = 0; k < sg.size(); ++k)
        CHECK(sg[k] == doctest::Approx(g.mdp.rewards[0][k] - 2.0 * g.mdp.rewards[1][k]));
    CHECK(active_constraints(g.mdp, unif, tight) == std::vector<std::size_t>{0});
}

TEST_CASE("supergradient bounds the finite difference along feasible directions") {
    const auto mdp = random_tabular_mdp(3, 2, 3, 3, 17);
    const auto spec = midpoint_constraints(mdp, 10.0);
    const auto pols = all_deterministic(mdp);
    Rng rng(5);
    std::uniform_int_distribution<std::size_t> pick(0, pols.size() - 1);
    const double lambda = 3.0, h = 1e-6;
    for (int k = 0; k < 100; ++k) {
        const auto d = occupancy_of_policy(mdp, pols[pick(rng)]).blend(occupancy_of_policy(mdp, pols[pick(rng)]), 0.3);
        const auto target = occupancy_of_policy(mdp, pols[pick(rng)]);
        // d + h (target - d) stays in the polytope
        const auto moved = d.blend(target, h);
        const auto sg = supergradient(mdp, d, lambda, spec);
        std::vector<double> dir(d.total.size());
        for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = moved.total[i] - d.total[i];
        const double lhs = reformulated_value(mdp, moved, lambda, spec) - reformulated_value(mdp, d, lambda, spec);
        CHECK(lhs <= dot(sg, dir) + 1e-10);
    }
}

TEST_CASE("LMO matches enumeration") {
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const auto mdp = random_tabular_mdp(2, 2, 3, 2, s, s % 2 == 0);
        const auto reward = combine_rewards(mdp, {1.0, -0.7});
        double best = -1e300;
        for (const auto& p : all_deterministic(mdp)) best = std::max(best, value_from_occupancy(occupancy_of_policy(mdp, p), reward));
        const auto res = lmo(mdp, reward);
        CHECK(res.value == doctest::Approx(best).epsilon(1e-12));
        CHECK(value_from_occupancy(res.occupancy, reward) == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("LMO on a zero reward picks the lexicographically first policy") {
    const auto mdp = random_tabular_mdp(3, 3, 2, 1, 4);
    const auto res = lmo(mdp, RewardTable(mdp.sa_size(), 0.0));
    CHECK(res.value == 0.0);
    CHECK(res.policy == TabularPolicy::deterministic(3, 3, 2, std::vector<std::size_t>(6, 0)));
}

TEST_CASE("LMO on r_0 is the unconstrained optimum") {
    const auto mdp = random_tabular_mdp(4, 2, 3, 2, 8);
    const auto bi = backward_induction(mdp, mdp.rewards[0]);
    const auto res = lmo(mdp, mdp.rewards[0]);
    CHECK(res.value == doctest::Approx(bi.value).epsilon(1e-12));
    CHECK(res.policy == bi.policy);
}

TEST_CASE("fixture suite converges to the oracle") {
    const auto games = load_tabular_games("tests/fixtures", "fw_");
    REQUIRE(games.size() == 5);
    for (const auto& g : games) {
        CHECK(g.mdp.n_states == 5);
        const auto res = fw_best_response(g.mdp, *g.lambda, g.spec, 10000, 1e-3);
        CHECK(res.gap <= 1e-3);
        CHECK(std::abs(res.value - vertex_pair_oracle(g.mdp, *g.lambda, g.spec)) <= 1e-3);
        CHECK(flow_residual(g.mdp, res.x) <= 1e-9);
        // one active constraint at the optimum
        std::vector<double> v;
        for (const auto& r : g.mdp.rewards) v.push_back(value_from_occupancy(res.x, r));
        CHECK(max_violation(v, g.spec) > 0.0);
        double w = 0.0;
        for (const auto& a : res.atoms) w += a.weight;
        CHECK(w == doctest::Approx(1.0));
    }
}

TEST_CASE("vertex-pair oracle agrees with a dense grid over two-atom mixtures") {
    const auto g = load_tabular_game("tests/fixtures/fw_2.game");
    // a coarser independent search: grid over pairs of deterministic policies
    const auto pols = all_deterministic(g.mdp);
    std::vector<std::vector<double>> vals;
    for (std::size_t k = 0; k < pols.size(); k += 7) vals.push_back(exact_values(g.mdp, pols[k]));
    double grid = -1e300;
    for (std::size_t i = 0; i < vals.size(); ++i)
        for (std::size_t j = i; j < vals.size(); ++j)
            for (int k = 0; k <= 20; ++k) {
                const double th = k / 20.0;
                std::vector<double> v(vals[i].size());
                for (std::size_t c = 0; c < v.size(); ++c) v[c] = (1 - th) * vals[i][c] + th * vals[j][c];
                grid = std::max(grid, v[0] - *g.lambda * std::max(0.0, max_violation(v, g.spec)));
            }
    CHECK(vertex_pair_oracle(g.mdp, *g.lambda, g.spec) >= grid - 1e-12);
}

TEST_CASE("policy readout round trips") {
    const auto mdp = random_tabular_mdp(3, 3, 4, 1, 21, false);
    SUBCASE("deterministic") {
        std::vector<std::size_t> choice(12);
        for (std::size_t k = 0; k < 12; ++k) choice[k] = (k * 7) % 3;
        const auto p = TabularPolicy::deterministic(3, 3, 4, choice);
        const auto q = policy_from_occupancy(occupancy_of_policy(mdp, p));
        const auto d = occupancy_of_policy(mdp, p);
        for (std::size_t h = 0; h < 4; ++h)
            for (std::size_t s = 0; s < 3; ++s) {
                double visit = 0.0;
                for (std::size_t a = 0; a < 3; ++a) visit += d.q(h, s, a);
                if (visit > 0.0)
                    for (std::size_t a = 0; a < 3; ++a) CHECK(q.prob(h, s, a) == doctest::Approx(p.prob(h, s, a)));
            }
    }
    SUBCASE("uniform") {
        const auto u = TabularPolicy::uniform(3, 3, 4);
        const auto q = policy_from_occupancy(occupancy_of_policy(mdp, u));
        for (std::size_t k = 0; k < u.probs().size(); ++k) CHECK(q.probs()[k] == doctest::Approx(u.probs()[k]));
    }
    SUBCASE("mixture, per-step readout") {
        const auto a = TabularPolicy::deterministic(3, 3, 4, std::vector<std::size_t>(12, 0));
        const auto b = TabularPolicy::deterministic(3, 3, 4, std::vector<std::size_t>(12, 2));
        const auto d = occupancy_of_policy(mdp, a).blend(occupancy_of_policy(mdp, b), 0.35);
        const auto back = occupancy_of_policy(mdp, policy_from_occupancy(d));
        for (std::size_t k = 0; k < d.per_step.size(); ++k) CHECK(back.per_step[k] == doctest::Approx(d.per_step[k]).epsilon(1e-12));
    }
}
