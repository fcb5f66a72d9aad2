// Writes the tabular fixtures under tests/fixtures. Frank-Wolfe instances are
// drawn at random and kept only when the optimum of L(., lambda) lies inside
// one linear piece of [g]_+ with the constraint violated there (FW with the
// open-loop step stalls when the optimum sits on the kink g = 0).
#include "morl/testbed.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace morl;

namespace {

void save(const std::string& dir, const TabularGame& g) {
    std::ofstream f(std::filesystem::path(dir) / (g.name + ".game"));
    f << "# " << g.name << '\n';
    write_tabular_game(f, g);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixture generator"};
    std::string dir = "tests/fixtures";
    std::size_t count = 5;
    std::uint64_t seed = 1;
    app.add_option("--out", dir);
    app.add_option("--count", count);
    app.add_option("--seed", seed);
    CLI11_PARSE(app, argc, argv);
    std::filesystem::create_directories(dir);

    const double eps = 1e-3;
    const std::size_t budget = static_cast<std::size_t>(10.0 / eps);
    const double lambdas[] = {0.5, 1.0, 2.0, 4.0};
    std::size_t kept = 0;
    for (std::uint64_t s = seed; kept < count && s < seed + 2000; ++s) {
        const auto mdp = random_tabular_mdp(5, 2, 2, 2, s);
        const auto spec = midpoint_constraints(mdp, 10.0);
        for (std::size_t k = 0; k < 4; ++k) {
            const double lam = lambdas[(kept + k) % 4];
            TabularGame g{"fw_" + std::to_string(kept + 1), mdp, spec, lam, std::nullopt};
            const auto rows = run_fw_suite({g}, budget, eps);
            if (!rows[0].pass) continue;
            // keep instances whose optimum violates the constraint
            const auto fw = fw_best_response(mdp, lam, spec, budget, eps);
            const double viol = positive_part_violation(exact_values(mdp, fw.policy), spec).g_plus;
            if (viol < 1e-3) continue;
            save(dir, g);
            std::cout << g.name << " seed " << s << " lambda " << lam << " iterations " << rows[0].iterations
                      << " gap " << rows[0].gap << " |L-oracle| " << std::abs(rows[0].value - rows[0].oracle)
                      << " [g]_+ " << viol << '\n';
            ++kept;
            break;
        }
    }
    if (kept < count) {
        std::cerr << "only " << kept << " instances found\n";
        return 1;
    }

    save(dir, toy_game(7));

    TabularGame slr{"safe_left_right", safe_left_right_mdp(4), safe_left_right_constraints(10.0), std::nullopt, 1.0};
    save(dir, slr);
    return 0;
}
