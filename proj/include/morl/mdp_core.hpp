#pragma once

#include "morl/common.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace morl {

/// Observation handed to policies. `state` carries the discrete state id for
/// tabular environments and is zero elsewhere.
struct Observation {
    std::vector<double> features;
    std::size_t state = 0;
};

/// Per-step reward vector (r_0, r_1, ..., r_m): objective first, then one
/// cost signal per constraint.
using RewardVector = std::vector<double>;

struct Transition {
    Observation next;
    RewardVector reward;
    bool terminal = false;
};

/**
 * Finite-horizon episodic MDP with a vector of per-step rewards.
 *
 * Instances are stateful (reset/step) and single threaded; parallel rollouts
 * work on clones.
 */
class EpisodicMDP {
  public:
    virtual ~EpisodicMDP() = default;

    virtual std::size_t action_count() const = 0;
    virtual std::size_t horizon() const = 0;
    /// m + 1
    virtual std::size_t reward_dim() const = 0;
    virtual std::size_t observation_dim() const = 0;

    /// Starts a new episode; x_0 is drawn from the initial distribution using
    /// a generator seeded with `seed`.
    virtual Observation reset(std::uint64_t seed) = 0;
    virtual Transition step(std::size_t action) = 0;

    virtual std::unique_ptr<EpisodicMDP> clone() const = 0;
};

/// Possibly stochastic, non-stationary policy.
class Policy {
  public:
    virtual ~Policy() = default;
    virtual std::size_t act(const Observation& obs, std::size_t step, Rng& rng) const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

/// Plays a fixed action regardless of the state.
class ConstantPolicy final : public Policy {
  public:
    explicit ConstantPolicy(std::size_t action) : action_(action) {}
    std::size_t act(const Observation&, std::size_t, Rng&) const override { return action_; }

  private:
    std::size_t action_;
};

/// Uniform over `n_actions` at every step.
class UniformRandomPolicy final : public Policy {
  public:
    explicit UniformRandomPolicy(std::size_t n_actions);
    std::size_t act(const Observation&, std::size_t, Rng& rng) const override;
    std::size_t action_count() const { return n_actions_; }

  private:
    std::size_t n_actions_;
};

/**
 * Distribution over policies. Sampling picks one member per episode, and that
 * member is played for the whole episode.
 */
class PolicyMixture {
  public:
    PolicyMixture() = default;
    PolicyMixture(PolicyPtr single); // NOLINT: implicit degenerate mixture
    PolicyMixture(std::vector<PolicyPtr> members, std::vector<double> weights);

    /// Uniform weights over `members`.
    static PolicyMixture uniform(std::vector<PolicyPtr> members);

    std::size_t size() const { return members_.size(); }
    const std::vector<PolicyPtr>& members() const { return members_; }
    const std::vector<double>& weights() const { return weights_; }

    /// Index of the member drawn for one episode.
    std::size_t sample_index(Rng& rng) const;

  private:
    std::vector<PolicyPtr> members_;
    std::vector<double> weights_;
};

struct TrajectoryStep {
    Observation observation;
    std::size_t action = 0;
    RewardVector reward;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    std::size_t member = 0; ///< mixture member that generated the episode

    /// Sum over steps of each reward component.
    RewardVector returns() const;
};

/// Episodic values V_i with standard errors of the Monte Carlo means.
struct ValueVector {
    std::vector<double> v;
    std::vector<double> std_error;
    std::size_t episodes = 0;

    std::size_t size() const { return v.size(); }
    double operator[](std::size_t i) const { return v[i]; }

    /// Exact values (zero standard error).
    static ValueVector exact(std::vector<double> values);
};

/// One episode. The seed determines both the environment reset and the
/// policy's randomness (including the mixture draw).
Trajectory rollout(EpisodicMDP& env, const PolicyMixture& policy, std::uint64_t seed);

/// Per-episode returns (episodes x reward_dim), episode j seeded with
/// derive_seed(seed, j). Episodes run on up to `jobs` threads, each on its own
/// clone of `env`.
std::vector<RewardVector> collect_returns(const EpisodicMDP& env, const PolicyMixture& policy,
                                          std::size_t n_episodes, std::uint64_t seed,
                                          std::size_t jobs = 1);

/// Sample means and standard errors of per-episode returns.
ValueVector summarize_returns(std::span<const RewardVector> returns);

ValueVector estimate_values(const EpisodicMDP& env, const PolicyMixture& policy,
                            std::size_t n_episodes, std::uint64_t seed, std::size_t jobs = 1);

} // namespace morl
