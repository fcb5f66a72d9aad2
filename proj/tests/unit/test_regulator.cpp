#include "morl/game_loop.hpp"
#include "morl/regulator.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace morl;

namespace {

/// Exhaustive l2 projection onto {x >= 0, sum x <= C}: every face of the set
/// (support S, with or without the sum constraint active) has a closed-form
/// projection; keep the feasible candidate closest to v.
std::vector<double> face_projection(const std::vector<double>& v, double C) {
    const std::size_t m = v.size();
    std::vector<double> best;
    double best_d = std::numeric_limits<double>::infinity();
    auto consider = [&](const std::vector<double>& x) {
        double s = 0.0, d = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (x[i] < 0.0) return;
            s += x[i];
            d += (x[i] - v[i]) * (x[i] - v[i]);
        }
        if (s > C * (1 + 1e-15) || d >= best_d) return;
        best_d = d;
        best = x;
    };
    for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
        std::vector<double> free_face(m, 0.0), sum_face(m, 0.0);
        double s = 0.0;
        std::size_t k = 0;
        for (std::size_t i = 0; i < m; ++i)
            if (mask >> i & 1) {
                free_face[i] = v[i];
                s += v[i];
                ++k;
            }
        consider(free_face);
        if (k == 0) continue;
        const double shift = (s - C) / static_cast<double>(k);
        for (std::size_t i = 0; i < m; ++i)
            if (mask >> i & 1) sum_face[i] = v[i] - shift;
        consider(sum_face);
    }
    return best;
}

} // namespace

TEST_CASE("projection onto the multiplier set") {
    const auto spec = ConstraintSpec::upper_bounds({0, 0, 0}, 5.0);
    const std::vector<double> v{3, 4, -1};
    const auto p = project_lambda(v, spec).lambda;
    CHECK(p[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(p[2] == 0.0);

    const std::vector<double> inside{1.0, 0.5, 2.0};
    CHECK(project_lambda(inside, spec).lambda == inside);
}

TEST_CASE("projection matches a brute-force projector for m <= 3") {
    Rng rng(17);
    std::uniform_real_distribution<double> u(-4.0, 6.0);
    for (std::size_t m = 1; m <= 3; ++m)
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> v(m);
            for (auto& x : v) x = u(rng);
            const auto spec = ConstraintSpec::upper_bounds(std::vector<double>(m, 0.0), 3.0);
            const auto p = project_lambda(v, spec).lambda;
            const auto q = face_projection(v, 3.0);
            for (std::size_t i = 0; i < m; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-9);
        }
}

TEST_CASE("ogd step") {
    const auto spec = ConstraintSpec::upper_bounds({0, 0}, 1e9);
    const LagrangeWeights lam{{1.0, 1.0}};
    const std::vector<double> g{-2.0, 3.0};
    const auto next = ogd_step(lam, g, 0.5, spec);
    CHECK(next.lambda[0] == doctest::Approx(2.0));
    CHECK(next.lambda[1] == 0.0);
    const std::vector<double> zero{0.0, 0.0};
    CHECK(ogd_step(lam, zero, 0.5, spec) == lam);

    const auto small = ConstraintSpec::upper_bounds({0, 0}, 2.0);
    Rng rng(2);
    LagrangeWeights x{{0.0, 0.0}};
    for (int t = 0; t < 100; ++t) {
        const std::vector<double> gg{std::normal_distribution<double>(0, 5)(rng), std::normal_distribution<double>(0, 5)(rng)};
        x = ogd_step(x, gg, 0.7, small);
        CHECK(x.lambda[0] >= 0.0);
        CHECK(x.lambda[1] >= 0.0);
        CHECK(x.l1() <= 2.0 + 1e-12);
    }
}

TEST_CASE("slacks") {
    const auto spec = ConstraintSpec{{1.0, -2.0}, {1.0, -1.0}, 10.0, {"a", "b"}};
    const std::vector<double> at_bound{7.0, 1.0, 2.0};
    const auto g = compute_slacks(at_bound, spec);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    const std::vector<double> v{7.0, 0.5, 3.0};
    const auto h = compute_slacks(v, spec);
    CHECK(h[0] == 0.5);
    CHECK(h[1] == 1.0);
}

TEST_CASE("realized regret matches vertex enumeration") {
    std::vector<RoundLoss> rounds{{1.0, {0.5, -2.0}, {0.0, 0.0}}, {2.0, {-1.0, 3.0}, {1.0, 0.5}}};
    const double total = (1.0) + (2.0 - 1.0 + 1.5);
    CHECK(realized_regret(rounds, 4.0) == doctest::Approx(total - min_total_loss_over_vertices(rounds, 4.0)));
    // vertices: 0 -> 3; 4 e1 -> 3 + 4(-0.5) = 1; 4 e2 -> 3 + 4(1) = 7
    CHECK(min_total_loss_over_vertices(rounds, 4.0) == doctest::Approx(1.0));

    std::vector<RoundLoss> feasible{{1.0, {0.5}, {0.3}}, {1.0, {0.2}, {0.6}}};
    CHECK(min_total_loss_over_vertices(feasible, 2.0) == doctest::Approx(2.0));
    CHECK(realized_regret(feasible, 2.0) == doctest::Approx(0.3 * 0.5 + 0.6 * 0.2));
}

TEST_CASE("lagrangian") {
    const auto spec = ConstraintSpec{{362.62, 10.81, 83.21, 258.23}, {1, 1, 1, 1}, 1e9, {}};
    // values chosen so the slacks are the given numbers
    const std::vector<double> v{20.52, 0.0, 0.0, 0.0, 0.0};
    const std::vector<double> ones{1, 1, 1, 1};
    CHECK(lagrangian(v, ones, spec) == doctest::Approx(735.39).epsilon(1e-12));
    const std::vector<double> zero(4, 0.0);
    CHECK(lagrangian(v, zero, spec) == 20.52);
    const std::vector<double> tight{20.52, 362.62, 10.81, 83.21, 258.23};
    CHECK(lagrangian(tight, ones, spec) == doctest::Approx(20.52));
}

TEST_CASE("theory step and diameter") {
    CHECK(lambda_diameter(ConstraintSpec::upper_bounds({0}, 3.0)) == 3.0);
    CHECK(lambda_diameter(ConstraintSpec::upper_bounds({0, 0}, 3.0)) == doctest::Approx(3.0 * std::sqrt(2.0)));
    CHECK(theory_step_size(2.0, 4.0, 100) == doctest::Approx(0.05));
}
