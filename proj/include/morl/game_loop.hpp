#pragma once

#include "morl/learner.hpp"
#include "morl/mdp_core.hpp"
#include "morl/regulator.hpp"
#include "morl/tabular.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace morl {

/// v_0 + lambda . compute_slacks(values, spec)
double lagrangian(const ValueVector& values, const LagrangeWeights& lambda, const ConstraintSpec& spec);
double lagrangian(std::span<const double> values, std::span<const double> lambda,
                  const ConstraintSpec& spec);

struct GameSettings {
    std::size_t rounds = 20;
    double eta = 0.0;            ///< OGD step; 0 selects D / (G sqrt(T))
    double grad_bound = 1.0;     ///< G for the theory step
    std::vector<double> lambda0; ///< empty = 0
    /// Optional per-constraint tightening subtracted from alpha for the learner
    /// and the regulator; feasibility is always judged on the original alpha.
    std::vector<double> tighten;

    double step_size(const ConstraintSpec& spec) const;
};

/// Learner side of the game: a best response to the played multipliers.
class BestResponder {
  public:
    virtual ~BestResponder() = default;
    /// `round` is 1-based. Returns the policy and an identifier for the trace.
    virtual std::pair<PolicyPtr, std::string> respond(const LagrangeWeights& lambda,
                                                      const ConstraintSpec& training_spec,
                                                      std::size_t round) = 0;
};

/// EvaluatePolicy: value vector of a round's policy.
class RoundEvaluator {
  public:
    virtual ~RoundEvaluator() = default;
    virtual ValueVector evaluate(const Policy& policy, std::size_t round) = 0;
};

struct RoundRecord {
    std::size_t round = 0;
    std::string policy_id;
    LagrangeWeights lambda;     ///< multiplier the learner responded to (lambda_{t-1})
    LagrangeWeights lambda_bar; ///< mean of the played multipliers up to this round
    LagrangeWeights lambda_next; ///< regulator update after observing the round
    ValueVector values;
    std::vector<double> slack;  ///< against the original alpha
    double lagrangian = 0.0;    ///< L(D_t, lambda_t) with the played multiplier
    bool feasible = false;      ///< min_i slack_i >= 0
};

struct GameFailure {
    std::size_t round = 0;
    std::size_t episode = 0;
    std::string message;
};

struct GameTrace {
    ConstraintSpec spec;
    std::vector<RoundRecord> rounds;
    std::vector<PolicyPtr> policies; ///< D_t, one per completed round
    std::optional<GameFailure> failure;

    std::size_t size() const { return rounds.size(); }
    LagrangeWeights lambda_bar() const;
    /// Uniform mixture over the first `upto` round policies (all when 0).
    PolicyMixture mixture(std::size_t upto = 0) const;
    /// Number of feasible round policies among the first `upto` rounds.
    std::size_t feasible_count(std::size_t upto) const;
    /// Objective, OGD slack and played multiplier per round, for realized_regret.
    std::vector<RoundLoss> losses() const;
    /// Time-averaged value vector of D-bar from the per-round estimates.
    std::vector<double> average_values(std::size_t upto = 0) const;
};

using RoundObserver = std::function<void(const RoundRecord&)>;

/**
 * The repeated game: for t = 1..T the learner best-responds to lambda_{t-1},
 * the evaluator measures the response, and the regulator takes one projected
 * OGD step on the slacks. A TrainingFailure ends the game early; the trace up
 * to the failing round is kept and the failure recorded.
 */
GameTrace run_repeated_game(const GameSettings& settings, const ConstraintSpec& spec,
                            BestResponder& learner, RoundEvaluator& evaluator,
                            const RoundObserver& observer = {});

/// Uniform mixture of the first `upto` round policies, evaluated by per-episode
/// member sampling.
ValueVector evaluate_mixture(const GameTrace& trace, std::size_t upto, const EpisodicMDP& env,
                             std::size_t episodes, std::uint64_t seed, std::size_t jobs = 1);

// *************************************************************************************
// **** Deep Q-learning players
// *************************************************************************************

/// DQN learner that keeps (or resets) its network between rounds. When
/// `checkpoint_dir` is set each round's network is written there.
class DqnResponder final : public BestResponder {
  public:
    DqnResponder(const EpisodicMDP& env, LearnerConfig cfg, std::uint64_t seed,
                 std::string checkpoint_dir = {}, std::uint64_t config_hash = 0);

    std::pair<PolicyPtr, std::string> respond(const LagrangeWeights& lambda,
                                              const ConstraintSpec& training_spec,
                                              std::size_t round) override;

    const std::vector<std::vector<CurvePoint>>& curves() const { return curves_; }
    const DqnLearner& learner() const { return learner_; }

  private:
    std::unique_ptr<EpisodicMDP> env_;
    DqnLearner learner_;
    std::uint64_t seed_;
    std::string checkpoint_dir_;
    std::uint64_t config_hash_;
    std::vector<std::vector<CurvePoint>> curves_;
};

/// Greedy-policy Monte Carlo evaluation with fresh episodes each round.
class MonteCarloEvaluator final : public RoundEvaluator {
  public:
    MonteCarloEvaluator(const EpisodicMDP& env, std::size_t episodes, std::uint64_t seed,
                        std::size_t jobs = 1);
    ValueVector evaluate(const Policy& policy, std::size_t round) override;

  private:
    std::unique_ptr<EpisodicMDP> env_;
    std::size_t episodes_;
    std::uint64_t seed_;
    std::size_t jobs_;
};

// *************************************************************************************
// **** Exact tabular players
// *************************************************************************************

/// Backward induction on the scalarized reward (an exact best response).
class ExactBestResponder final : public BestResponder {
  public:
    explicit ExactBestResponder(TabularMDP mdp) : mdp_(std::move(mdp)) {}
    std::pair<PolicyPtr, std::string> respond(const LagrangeWeights& lambda,
                                              const ConstraintSpec& training_spec,
                                              std::size_t round) override;

  private:
    TabularMDP mdp_;
};

/// Exact values through the occupancy measure.
class ExactEvaluator final : public RoundEvaluator {
  public:
    explicit ExactEvaluator(TabularMDP mdp) : mdp_(std::move(mdp)) {}
    ValueVector evaluate(const Policy& policy, std::size_t round) override;

  private:
    TabularMDP mdp_;
};

/// max_D L(D, lambda): the optimal value of the scalarized reward.
double best_response_value(const TabularMDP& mdp, const ConstraintSpec& spec,
                           const LagrangeWeights& lambda);

/// Both sides of the approximate-equilibrium condition for (D-bar, lambda-bar):
/// upper = max_D L(D, lambda-bar) - L(D-bar, lambda-bar) and
/// lower = L(D-bar, lambda-bar) - min_lambda L(D-bar, lambda).
struct MinimaxGaps {
    double upper = 0.0;
    double lower = 0.0;
    double value = 0.0; ///< L(D-bar, lambda-bar)
    double max() const { return std::max(upper, lower); }
};
MinimaxGaps minimax_gaps(const TabularMDP& mdp, const GameTrace& trace);

/// Round log CSV: round, v_0, g_1..g_m, lambda_1..lambda_m, lambda_bar_1..m, L, feasible.
void write_rounds_csv(std::ostream& out, const GameTrace& trace);
void write_rounds_csv_header(std::ostream& out, std::size_t m);
void write_rounds_csv_row(std::ostream& out, const RoundRecord& rec);

} // namespace morl
