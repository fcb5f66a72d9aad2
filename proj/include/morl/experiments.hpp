#pragma once

#include "morl/config.hpp"
#include "morl/eval_bench.hpp"
#include "morl/extraction.hpp"
#include "morl/game_loop.hpp"
#include "morl/learner.hpp"
#include "morl/testbed.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace morl {

/// Warehouse environment built from the [sim] and [constraints] sections.
sim::WarehouseEnv make_warehouse(const ExperimentConfig& cfg);

// *************************************************************************************
// **** Single-objective learning
// *************************************************************************************

struct SingleObjectiveRun {
    TrainResult result;
    double seconds = 0.0;
};

/// lambda = 0 training for cfg.learner.episodes_per_round episodes.
SingleObjectiveRun run_single_objective(const ExperimentConfig& cfg, std::uint64_t seed);

/// (mean of the last `window` returns - mean of the first `window`) / |mean of the first|.
double curve_improvement(const std::vector<CurvePoint>& curve, std::size_t window = 5);

// *************************************************************************************
// **** Repeated game on the warehouse
// *************************************************************************************

struct WarehouseGameRun {
    GameTrace trace;
    std::vector<std::vector<CurvePoint>> curves; ///< per round
    double seconds = 0.0;
};

WarehouseGameRun run_warehouse_game(const ExperimentConfig& cfg, std::uint64_t seed,
                                    const std::string& checkpoint_dir = {},
                                    const RoundObserver& observer = {});

/// round,episode,scalarized_return,r_0..r_m
void write_round_curves_csv(std::ostream& out, const std::vector<std::vector<CurvePoint>>& curves);
/// round,lambda_1..m,lambda_bar_1..m,l1
void write_lambdas_csv(std::ostream& out, const GameTrace& trace);

/// Rebuilds the trace of a finished warehouse run from rounds.csv and
/// checkpoints/round_NNN.qnet. Only the objective estimate, slacks,
/// multipliers and feasibility flags are restored.
GameTrace load_game_run(const std::string& dir, const ConstraintSpec& spec);

// *************************************************************************************
// **** Baseline comparison
// *************************************************************************************

struct SeedComparison {
    std::uint64_t seed = 0;
    KPIReport unconstrained;
    KPIReport random;
    std::optional<KPIReport> morl;
    std::optional<std::size_t> best_round; ///< 0-based
};

/// Confirmed best-feasible round of `trace` against the two baselines, all
/// evaluated on the same episode seeds.
SeedComparison compare_seed(const ExperimentConfig& cfg, std::uint64_t seed, const GameTrace& trace);

struct ComparisonVerdict {
    std::vector<ColumnSummary> columns; ///< Unconstrained, MORL, Random
    bool ordered = false;        ///< means strictly decreasing left to right
    bool separated = false;      ///< non-overlapping 95% CIs between neighbours
    bool baselines_violate = false; ///< both baselines have negative manual-cap slack
    bool morl_feasible = false;  ///< every mean MORL slack >= 0
    std::size_t morl_seeds = 0;  ///< seeds that produced a feasible round

    bool pass() const { return ordered && separated && baselines_violate && morl_feasible; }
};

ComparisonVerdict summarize_comparison(const std::vector<SeedComparison>& seeds);
/// seed,policy,best_round,etph,<slack per label>,feasible
void write_seed_kpis_csv(std::ostream& out, const std::vector<SeedComparison>& seeds);

// *************************************************************************************
// **** Tabular games
// *************************************************************************************

enum class GameForm { Lagrangian, Reformulated };

struct TabularGameRun {
    GameForm form = GameForm::Lagrangian;
    std::vector<TabularPolicy> policies; ///< D_t
    std::vector<std::vector<double>> values; ///< exact V per round
    std::vector<std::vector<double>> lambdas; ///< multiplier played against D_t
    std::vector<double> lambda_bar; ///< mean of the played multipliers
    double scalar_lambda_bar = 0.0; ///< l1 norm of lambda_bar
    std::optional<MinimaxGaps> gaps; ///< Lagrangian form only
};

TabularGameRun run_tabular_game(const TabularGame& game, GameForm form, const ExperimentConfig& cfg);

/// round,lambda_1..,V_0..V_m
void write_tabular_rounds_csv(std::ostream& out, const TabularGameRun& run);

/// Brute-force min over a lambda grid (step C / steps) of max_D L(D, lambda),
/// the max taken by exact backward induction.
double brute_force_lagrangian_value(const TabularMDP& mdp, const ConstraintSpec& spec, std::size_t steps);

// *************************************************************************************
// **** Warehouse extraction
// *************************************************************************************

struct WarehouseExtraction {
    std::uint64_t required = 0; ///< Hoeffding count at (lambda-bar, H, eps, delta, T)
    std::size_t used = 0;       ///< min(required, max_samples)
    double lambda_bar = 0.0;
    IterateSelection selection;
};

WarehouseExtraction extract_warehouse(const ExperimentConfig& cfg, const GameTrace& trace,
                                      std::uint64_t seed);
void write_warehouse_extraction(std::ostream& out, const ExperimentConfig& cfg, const WarehouseExtraction& x);

} // namespace morl
