#include "morl/extraction.hpp"
#include "morl/testbed.hpp"

#include <doctest.h>

#include <cmath>

using namespace morl;

namespace {

// one state, two actions; r_0 = 1 for action 0 and 0.6 for action 1, no signal
TabularMDP two_value_mdp(std::size_t H) {
    TabularMDP m;
    m.n_states = 1;
    m.n_actions = 2;
    m.horizon = H;
    m.transitions = {1.0, 1.0};
    m.rewards = {{1.0, 0.6}, {0.0, 0.0}};
    m.initial = {1.0};
    return m;
}

double mixture_value(const TabularMDP& mdp, const TabularPolicy& a, const TabularPolicy& b, double lambda,
                     const ConstraintSpec& spec) {
    const auto d = occupancy_of_policy(mdp, a).blend(occupancy_of_policy(mdp, b), 0.5);
    std::vector<double> v;
    for (const auto& r : mdp.rewards) v.push_back(value_from_occupancy(d, r));
    return reformulated_lagrangian(v[0], positive_part_violation(v, spec).g_plus, lambda);
}

double exact_l(const TabularMDP& mdp, const TabularPolicy& p, double lambda, const ConstraintSpec& spec) {
    const auto v = exact_values(mdp, p);
    return reformulated_lagrangian(v[0], positive_part_violation(v, spec).g_plus, lambda);
}

} // namespace

TEST_CASE("positive part violation") {
    const auto spec = ConstraintSpec::upper_bounds({5.0, 5.0}, 10.0);
    const std::vector<double> v{0.0, 3.0, 7.0};
    const auto x = positive_part_violation(v, spec);
    CHECK(x.g == 2.0);
    CHECK(x.g_plus == 2.0);

    const std::vector<double> feasible{0.0, 1.0, 4.0};
    CHECK(positive_part_violation(feasible, spec).g < 0.0);
    CHECK(positive_part_violation(feasible, spec).g_plus == 0.0);

    const std::vector<double> boundary{0.0, 5.0, 4.0};
    CHECK(positive_part_violation(boundary, spec).g == 0.0);
    CHECK(positive_part_violation(boundary, spec).g_plus == 0.0);

    ConstraintSpec lower = ConstraintSpec::upper_bounds({-2.0}, 1.0);
    lower.sign = {-1.0};
    const std::vector<double> below{0.0, 1.0};
    CHECK(positive_part_violation(below, lower).g == doctest::Approx(1.0));
}

TEST_CASE("reformulated lagrangian") {
    CHECK(reformulated_lagrangian(10.0, 2.0, 3.0) == 4.0);
    CHECK(reformulated_lagrangian(7.5, 0.0, 3.0) == 7.5);
    CHECK(reformulated_lagrangian(7.5, 4.0, 0.0) == 7.5);
}

TEST_CASE("required samples") {
    CHECK(required_samples(1.0, 10.0, 1.0, 0.05, 10) == 2697);
    // ceil(450 ln 400) computed independently
    CHECK(required_samples(1.0, 10.0, 1.0, 0.05, 10) ==
          static_cast<std::uint64_t>(std::ceil(450.0 * std::log(400.0))));

    const double lam = 2.0, H = 5.0, eps = 0.5, delta = 0.1;
    const double coef = (1 + 2 * lam) * (1 + 2 * lam) * H * H / (2 * eps * eps);
    for (std::size_t T : {1, 3, 17}) {
        const double exact_T = coef * std::log(2.0 * T / delta);
        const double exact_2T = exact_T + coef * std::log(2.0);
        CHECK(required_samples(lam, H, eps, delta, T) == static_cast<std::uint64_t>(std::ceil(exact_T)));
        CHECK(required_samples(lam, H, eps, delta, 2 * T) == static_cast<std::uint64_t>(std::ceil(exact_2T)));
    }
    // n scales with H^2
    const auto n1 = required_samples(1.0, 8.0, 1.0, 0.05, 10);
    const auto n2 = required_samples(1.0, 16.0, 1.0, 0.05, 10);
    CHECK(std::abs(static_cast<double>(n2) - 4.0 * static_cast<double>(n1)) <= 4.0);

    ReformSpec rs;
    rs.constraints = ConstraintSpec::upper_bounds({1.0}, 5.0);
    rs.lambda_bar = 1.0;
    rs.horizon = 10;
    rs.epsilon = 1.0;
    rs.delta = 0.05;
    rs.rounds = 10;
    CHECK(required_samples(rs) == 2697);
    CHECK_THROWS(required_samples(1.0, 10.0, 0.0, 0.05, 10));
    CHECK_THROWS(required_samples(1.0, 10.0, 1.0, 1.5, 10));
}

TEST_CASE("bridge lambda is the l1 norm") {
    CHECK(bridge_lambda(LagrangeWeights{{1.0, 2.5, 0.5}}) == 4.0);
    CHECK(bridge_lambda(LagrangeWeights{{0.0}}) == 0.0);
}

TEST_CASE("selection") {
    const auto mdp = two_value_mdp(5);
    TabularEnv env(mdp);
    const auto spec = ConstraintSpec::upper_bounds({1.0}, 5.0);
    const auto a = TabularPolicy::deterministic(1, 2, 5, std::vector<std::size_t>(5, 0));
    const auto b = TabularPolicy::deterministic(1, 2, 5, std::vector<std::size_t>(5, 1));
    REQUIRE(exact_l(mdp, a, 0.0, spec) == doctest::Approx(5.0));
    REQUIRE(exact_l(mdp, b, 0.0, spec) == doctest::Approx(3.0));

    SUBCASE("one round") {
        const auto sel = select_best_iterate({PolicyMixture(std::make_shared<TabularPolicy>(b))}, 0.0, spec, env, 3, 1);
        CHECK(sel.t_star == 1);
        CHECK(sel.table.size() == 1);
    }
    SUBCASE("ties go to the first round") {
        std::vector<PolicyMixture> same(4, PolicyMixture(std::make_shared<TabularPolicy>(a)));
        CHECK(select_best_iterate(same, 0.0, spec, env, 10, 2).t_star == 1);
    }
    SUBCASE("the larger value wins over repetitions") {
        const auto n = required_samples(0.0, 5.0, 0.5, 0.05, 2);
        const std::vector<PolicyMixture> its{PolicyMixture(std::make_shared<TabularPolicy>(a)),
                                             PolicyMixture(std::make_shared<TabularPolicy>(b))};
        std::size_t first = 0;
        for (std::size_t rep = 0; rep < 200; ++rep)
            first += select_best_iterate(its, 0.0, spec, env, n, derive_seed(11, rep)).t_star == 1 ? 1 : 0;
        CHECK(static_cast<double>(first) / 200.0 >= 0.95);
    }
}

TEST_CASE("selection on a stochastic instance concentrates") {
    const auto g = toy_game(7);
    TabularEnv env(g.mdp);
    std::vector<PolicyMixture> its;
    std::vector<double> exact;
    for (std::size_t a = 0; a < 2; ++a) {
        const auto p = TabularPolicy::deterministic(3, 2, 3, std::vector<std::size_t>(9, a));
        its.emplace_back(std::make_shared<TabularPolicy>(p));
        exact.push_back(exact_l(g.mdp, p, 1.0, g.spec));
    }
    const auto n = required_samples(1.0, 3.0, 0.5, 0.05, 2);
    const auto sel = select_best_iterate(its, 1.0, g.spec, env, n, 5);
    for (std::size_t t = 0; t < 2; ++t) CHECK(std::abs(sel.table[t].l_hat - exact[t]) <= 0.5);
    // selection optimality on the concentration event
    CHECK(exact[sel.t_star - 1] >= std::max(exact[0], exact[1]) - 1.0);
}

TEST_CASE("jensen gap") {
    CHECK(jensen_gap(4.0, std::vector<double>{4.0, 4.0}) == 0.0);

    SUBCASE("cancellation makes the gap 3 lambda") {
        const auto mdp = safe_left_right_mdp(4);
        const auto spec = safe_left_right_constraints(10.0);
        const auto left = TabularPolicy::deterministic(3, 3, 4, std::vector<std::size_t>(12, 1));
        const auto right = TabularPolicy::deterministic(3, 3, 4, std::vector<std::size_t>(12, 2));
        const double lam = 2.0;
        const double mix = mixture_value(mdp, left, right, lam, spec);
        const std::vector<double> its{exact_l(mdp, left, lam, spec), exact_l(mdp, right, lam, spec)};
        // each side accumulates a signal of 3 over the horizon; the mixture's signals cancel
        CHECK(jensen_gap(mix, its) == doctest::Approx(3.0 * lam).epsilon(1e-12));
    }
    SUBCASE("linear regime") {
        const auto g = toy_game(9);
        ConstraintSpec loose = g.spec;
        loose.alpha = {100.0};
        const auto p = TabularPolicy::deterministic(3, 2, 3, std::vector<std::size_t>(9, 0));
        const auto q = TabularPolicy::uniform(3, 2, 3);
        const double mix = mixture_value(g.mdp, p, q, 1.5, loose);
        CHECK(std::abs(jensen_gap(mix, std::vector<double>{exact_l(g.mdp, p, 1.5, loose),
                                                            exact_l(g.mdp, q, 1.5, loose)})) <= 1e-9);
    }
    SUBCASE("nonnegative on random mixtures") {
        for (std::uint64_t s = 1; s <= 10; ++s) {
            const auto g = toy_game(s);
            const auto p = backward_induction(g.mdp, g.mdp.rewards[0]).policy;
            const auto q = backward_induction(g.mdp, combine_rewards(g.mdp, {0.0, -1.0})).policy;
            const double mix = mixture_value(g.mdp, p, q, 2.0, g.spec);
            CHECK(jensen_gap(mix, std::vector<double>{exact_l(g.mdp, p, 2.0, g.spec), exact_l(g.mdp, q, 2.0, g.spec)}) >=
                  -1e-12);
        }
    }
}

TEST_CASE("certificate on reformulated toy games") {
    for (std::uint64_t s = 1; s <= 3; ++s) {
        const auto g = toy_game(s);
        ReformGameSettings rs;
        rs.rounds = 5;
        rs.grad_bound = 3.0;
        const auto trace = run_reformulated_game(g.mdp, g.spec, rs);
        REQUIRE(trace.rounds.size() == 5);
        const auto n = required_samples(trace.lambda_bar(), 3.0, 0.5, 0.05, 5);
        const auto cert = extraction_certificate(g.mdp, trace, n, derive_seed(s, 3));
        CHECK(cert.holds);
        CHECK(cert.jensen >= -1e-9);
        CHECK(cert.nu >= -1e-9);
        CHECK(cert.samples == n);
        CHECK(cert.certifying_policy == trace.rounds[cert.t_star - 1].policy);
        CHECK(cert.l_tstar == doctest::Approx(cert.exact_l[cert.t_star - 1]));
    }
}

TEST_CASE("certificate with one pure round") {
    const auto g = toy_game(4);
    const auto p = backward_induction(g.mdp, g.mdp.rewards[0]).policy;
    const auto cert = extraction_certificate(g.mdp, g.spec, {p}, 1.0, 50, 9);
    CHECK(cert.t_star == 1);
    CHECK(cert.certifying_policy == p);
    CHECK(cert.jensen == doctest::Approx(0.0).epsilon(1e-12));
}
