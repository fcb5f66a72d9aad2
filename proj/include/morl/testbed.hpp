#pragma once

#include "morl/extraction.hpp"
#include "morl/frank_wolfe.hpp"
#include "morl/regulator.hpp"
#include "morl/tabular.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace morl {

/**
 * A tabular MDP with its constraints. On disk: the tabular_mdp text followed by
 *
 *   constraints m cap C
 *   alpha a_1 ... a_m
 *   sign  s_1 ... s_m
 *   [lambda x]          (multiplier for single-lambda solves)
 *   [min_violation x]   (lower bound on each support policy's [g]_+ in the
 *                        cancellation demo)
 */
struct TabularGame {
    std::string name;
    TabularMDP mdp;
    ConstraintSpec spec;
    std::optional<double> lambda;
    std::optional<double> min_violation;
};

TabularGame read_tabular_game(std::istream& in, std::string name = {});
void write_tabular_game(std::ostream& out, const TabularGame& game);
TabularGame load_tabular_game(const std::string& path);
/// Every *.game file in `dir`, sorted by name.
std::vector<TabularGame> load_tabular_games(const std::string& dir, const std::string& prefix = {});

/// Thresholds halfway between the smallest and the unconstrained-optimal V_i,
/// which makes each constraint bind.
ConstraintSpec midpoint_constraints(const TabularMDP& mdp, double cap);

/// Random instance (3 states, 2 actions, H = 3, one constraint) used by the
/// minimax and extraction checks.
TabularGame toy_game(std::uint64_t seed, double cap = 10.0);

struct FwSuiteRow {
    std::string name;
    double lambda = 0.0;
    std::size_t iterations = 0;
    double gap = 0.0;
    double value = 0.0;
    double oracle = 0.0; ///< exact max over the occupancy polytope
    double max_flow_residual = 0.0;
    bool pass = false;   ///< gap <= eps and |oracle - value| <= eps
};

/// Brute-force max of L(., lambda) for one constraint: every deterministic
/// policy plus, for each pair, the mixture on the constraint boundary.
/// Feasible for (|A|^(|S| H))^2 up to a few hundred thousand pairs.
double vertex_pair_oracle(const TabularMDP& mdp, double lambda, const ConstraintSpec& spec);

std::vector<FwSuiteRow> run_fw_suite(const std::vector<TabularGame>& games, std::size_t max_iterations,
                                     double eps);
void write_fw_suite_csv(std::ostream& out, const std::vector<FwSuiteRow>& rows);

struct ConcentrationResult {
    std::size_t repetitions = 0;
    std::size_t successes = 0;
    std::uint64_t n = 0;
    double max_deviation = 0.0;   ///< largest max_t |L-hat - L| seen
    double coverage_lower = 0.0;  ///< one-sided 95% Clopper-Pearson bound on coverage
    double target = 0.0;          ///< 1 - delta

    double coverage() const { return static_cast<double>(successes) / static_cast<double>(repetitions); }
    bool pass() const { return coverage() >= target; }
};

/// Repeats the estimate of L(D_t, lambda_bar) for every iterate with
/// n = required_samples(lambda_bar, H, eps, delta, T) and counts repetitions in
/// which max_t |L-hat - L| <= eps.
ConcentrationResult run_concentration(const TabularGame& game, const std::vector<TabularPolicy>& iterates,
                                      double lambda_bar, double epsilon, double delta,
                                      std::size_t repetitions, std::uint64_t seed, std::size_t jobs = 1);
void write_concentration_csv(std::ostream& out, const ConcentrationResult& r);

/// Lower one-sided Clopper-Pearson bound for k successes in n trials.
double clopper_pearson_lower(std::size_t k, std::size_t n, double confidence = 0.95);

/// Always-left and always-right policies mixed 50/50 on a safe/left/right game.
CancellationReport left_right_cancellation(const TabularGame& game);
CancellationReport left_right_cancellation(std::size_t horizon);
void write_cancellation_csv(std::ostream& out, const CancellationReport& r);

} // namespace morl
