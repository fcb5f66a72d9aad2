#pragma once

#include "morl/mdp_core.hpp"
#include "morl/qnetwork.hpp"
#include "morl/regulator.hpp"
#include "morl/tabular.hpp"

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace morl {

/// Multipliers and thresholds that turn a reward vector into one scalar.
struct ScalarizedSpec {
    std::vector<double> lambda;
    std::vector<double> alpha;
    std::vector<double> sign;
    double horizon = 1.0;

    std::size_t size() const { return lambda.size(); }
    /// Throws ValidationError for negative multipliers or mismatched lengths.
    void validate() const;

    static ScalarizedSpec from(const ConstraintSpec& spec, const LagrangeWeights& lambda,
                               std::size_t horizon);
    /// lambda = 0 (single-objective mode).
    static ScalarizedSpec unconstrained(const ConstraintSpec& spec, std::size_t horizon);
};

/// r_0 + sum_i lambda_i (alpha_i / H - sign_i * r_i). `reward` holds r_0..r_m
/// with r_i the per-step cost signal of constraint i.
double scalarize(std::span<const double> reward, const ScalarizedSpec& spec);

/// Scalarized S x A reward table of a tabular MDP.
RewardTable scalarized_table(const TabularMDP& mdp, const ScalarizedSpec& spec);

struct LearnerConfig {
    std::size_t episodes_per_round = 30;
    std::size_t replay_capacity = 50000;
    std::size_t batch_size = 32;
    std::size_t target_sync = 1000; ///< gradient updates between target copies
    std::size_t train_every = 1;   ///< environment steps per gradient update
    std::size_t warmup_steps = 500;
    double learning_rate = 3e-4;
    double eps_start = 1.0;
    double eps_warm_start = 0.3; ///< starting epsilon once the network has been trained
    double eps_end = 0.05;
    double eps_decay_fraction = 0.6; ///< share of the round's episodes over which epsilon decays
    std::vector<int> hidden = {64, 64};
    double gamma = 0.99;
    double reward_scale = 0.1; ///< multiplies scalarized rewards inside the TD target
    double huber_delta = 1.0;
    bool warm_start = true;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Greedy policy of a frozen Q-network snapshot; ties go to the lowest action.
class GreedyQPolicy final : public Policy {
  public:
    explicit GreedyQPolicy(std::shared_ptr<const Mlp> net) : net_(std::move(net)) {}
    std::size_t act(const Observation& obs, std::size_t step, Rng& rng) const override;
    const Mlp& network() const { return *net_; }

  private:
    std::shared_ptr<const Mlp> net_;
};

struct CurvePoint {
    std::size_t episode = 0;
    double scalarized_return = 0.0;
    std::vector<double> returns; ///< per-objective returns
};

struct TrainResult {
    std::shared_ptr<const GreedyQPolicy> policy;
    std::vector<CurvePoint> curve;
};

/**
 * Episodic DQN: experience replay, periodic target network, epsilon-greedy
 * exploration. Replay stores raw reward vectors and scalarizes at sample
 * time, so experience survives a change of multipliers between rounds.
 */
class DqnLearner {
  public:
    DqnLearner(std::size_t observation_dim, std::size_t n_actions, LearnerConfig cfg);

    /// Runs cfg.episodes_per_round episodes against `spec`. Throws
    /// TrainingFailure if the loss or parameters become non-finite.
    TrainResult train(EpisodicMDP& env, const ScalarizedSpec& spec, std::uint64_t seed);

    /// Greedy policy of the current parameters (a copy, unaffected by later training).
    std::shared_ptr<const GreedyQPolicy> snapshot() const;

    /// Reinitializes parameters and clears replay (training from scratch).
    void reset(std::uint64_t seed);

    const LearnerConfig& config() const { return cfg_; }
    const Mlp& online() const { return online_; }
    const Mlp& target() const { return target_; }
    std::size_t episodes_trained() const { return episodes_trained_; }
    std::size_t updates() const { return updates_; }

  private:
    void remember(const std::vector<double>& obs, std::size_t action, const RewardVector& reward,
                  const std::vector<double>& next, bool terminal);
    double update(const ScalarizedSpec& spec, Rng& rng);

    LearnerConfig cfg_;
    std::size_t obs_dim_;
    std::size_t n_actions_;
    Mlp online_;
    Mlp target_;

    // ring buffer
    std::size_t reward_dim_ = 0;
    std::size_t stored_ = 0;
    std::size_t head_ = 0;
    std::vector<double> obs_buf_, next_buf_, reward_buf_;
    std::vector<int> action_buf_;
    std::vector<char> terminal_buf_;

    std::size_t episodes_trained_ = 0;
    std::size_t updates_ = 0;
    std::size_t steps_ = 0;
};

/// Fresh learner, one round of training.
TrainResult train_best_response(EpisodicMDP& env, const ScalarizedSpec& spec,
                                const LearnerConfig& cfg);

/// Optimal scalarized value minus the policy's exact scalarized value.
double best_response_gap(const TabularMDP& mdp, const TabularPolicy& policy,
                         const ScalarizedSpec& spec);
/// Same, for any policy on a TabularEnv; other environments throw UnsupportedError.
double best_response_gap(const EpisodicMDP& env, const Policy& policy, const ScalarizedSpec& spec);

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

void save_checkpoint(const std::string& path, const Mlp& net, std::uint64_t config_hash);
/// Returns the network and writes the embedded hash to `config_hash` when non-null.
Mlp load_checkpoint(const std::string& path, std::uint64_t* config_hash = nullptr);

} // namespace morl
