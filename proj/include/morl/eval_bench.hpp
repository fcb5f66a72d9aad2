#pragma once

#include "morl/game_loop.hpp"
#include "morl/learner.hpp"
#include "morl/mdp_core.hpp"
#include "morl/regulator.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morl {

struct NormalCI {
    double mean = 0.0;
    double half_width = 0.0;
    double lo() const { return mean - half_width; }
    double hi() const { return mean + half_width; }
};

/// Normal-approximation interval over independent per-seed means.
NormalCI normal_ci(std::span<const double> samples, double z = 1.959963984540054);

/**
 * Averaged KPIs of one policy. ETPH is the objective's per-step mean (V_0 / H);
 * slacks are in level units, alpha_i - sign_i * mean level.
 */
struct KPIReport {
    double etph = 0.0;
    std::vector<double> slack;
    std::vector<std::string> labels;
    bool feasible = false;
    std::size_t episodes = 0; ///< per seed
    std::vector<std::uint64_t> seeds;
    std::vector<double> seed_etph; ///< one mean per seed, for CIs
    std::vector<std::vector<double>> seed_slack;
};

KPIReport evaluate_policy(const EpisodicMDP& env, const PolicyMixture& policy,
                          const ConstraintSpec& spec, std::size_t episodes,
                          std::span<const std::uint64_t> seeds, std::size_t jobs = 1);
KPIReport evaluate_policy(const EpisodicMDP& env, PolicyPtr policy, const ConstraintSpec& spec,
                          std::size_t episodes, std::span<const std::uint64_t> seeds,
                          std::size_t jobs = 1);

enum class BaselineKind { Random, Unconstrained };

/// Random: uniform over the env's actions. Unconstrained: greedy policy of a
/// lambda = 0 training run with the given learner config.
PolicyPtr make_baseline(BaselineKind kind, const EpisodicMDP& env, const ConstraintSpec& spec,
                        const LearnerConfig& cfg);

struct FeasibilityCurves {
    std::vector<std::vector<std::size_t>> per_seed; ///< cumulative feasible count per round
    std::vector<double> best, mean, median, worst;
};

/// Shorter traces (failed runs) are padded with their last cumulative count.
FeasibilityCurves count_feasible_rounds(const std::vector<GameTrace>& traces);
FeasibilityCurves count_feasible_rounds(const std::vector<std::vector<bool>>& feasible_flags);

/// Feasible round with the largest objective estimate (0-based index).
std::optional<std::size_t> select_best_feasible(const GameTrace& trace);

/// Re-estimates every round flagged feasible on `confirm_episodes` fresh
/// episodes and returns the one with the highest confirmed objective among
/// those still feasible.
std::optional<std::size_t> select_best_feasible(const GameTrace& trace, const EpisodicMDP& env,
                                                std::size_t confirm_episodes, std::uint64_t seed,
                                                std::size_t jobs = 1);

/// One column of the comparison table, aggregated over seeds; each seed may contribute a
/// different policy.
struct ColumnSummary {
    std::string name;
    NormalCI etph;
    std::vector<double> slack; ///< mean over seeds
    std::vector<std::string> labels;
    std::size_t seeds = 0;
    std::size_t feasible_seeds = 0;

    bool feasible() const;
};

ColumnSummary summarize_column(std::string name, const std::vector<KPIReport>& reports);

/// column,etph_mean,etph_lo,etph_hi,<slack per label>,feasible,seeds
void write_comparison_csv(std::ostream& out, const std::vector<ColumnSummary>& cols);
/// Rows are KPIs, columns are policies.
void write_comparison_text(std::ostream& out, const std::vector<ColumnSummary>& cols);
/// round,best,mean,median,worst
void write_feasibility_csv(std::ostream& out, const FeasibilityCurves& curves);

} // namespace morl
