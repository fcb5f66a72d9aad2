#pragma once

#include "morl/mdp_core.hpp"

#include <iosfwd>
#include <vector>

namespace morl {

/// Per-(state, action) table, row major: index = s * n_actions + a.
using RewardTable = std::vector<double>;

/**
 * Finite-horizon tabular MDP with stationary rewards r_i(s, a), i = 0..m.
 *
 * Transitions are either stationary (one S x A x S tensor) or given per step
 * (H tensors).
 */
struct TabularMDP {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::size_t horizon = 0;
    bool stationary = true;
    /// [h][s][a][s'] (h omitted when stationary)
    std::vector<double> transitions;
    /// rewards[i] is the S x A table of objective i; rewards[0] is the objective.
    std::vector<RewardTable> rewards;
    std::vector<double> initial;

    std::size_t objectives() const { return rewards.size(); }
    std::size_t sa_size() const { return n_states * n_actions; }

    double p(std::size_t h, std::size_t s, std::size_t a, std::size_t s2) const {
        const std::size_t base = stationary ? 0 : h * n_states * n_actions * n_states;
        return transitions[base + (s * n_actions + a) * n_states + s2];
    }
    double& p_mut(std::size_t h, std::size_t s, std::size_t a, std::size_t s2) {
        const std::size_t base = stationary ? 0 : h * n_states * n_actions * n_states;
        return transitions[base + (s * n_actions + a) * n_states + s2];
    }

    /// Throws ValidationError unless every row is stochastic within 1e-12 and
    /// all shapes agree.
    void validate() const;
};

/**
 * Non-stationary stochastic tabular policy pi_h(a | s), stored [h][s][a].
 */
class TabularPolicy final : public Policy {
  public:
    TabularPolicy() : n_states_(0), n_actions_(0), horizon_(0) {}
    TabularPolicy(std::size_t n_states, std::size_t n_actions, std::size_t horizon,
                  std::vector<double> probs);

    static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions,
                                 std::size_t horizon);
    /// choice[h * S + s] is the action played in state s at step h.
    static TabularPolicy deterministic(std::size_t n_states, std::size_t n_actions,
                                       std::size_t horizon,
                                       const std::vector<std::size_t>& choice);

    std::size_t act(const Observation& obs, std::size_t step, Rng& rng) const override;

    double prob(std::size_t h, std::size_t s, std::size_t a) const {
        return probs_[(h * n_states_ + s) * n_actions_ + a];
    }
    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    std::size_t horizon() const { return horizon_; }
    const std::vector<double>& probs() const { return probs_; }

    bool operator==(const TabularPolicy& other) const {
        return n_states_ == other.n_states_ && n_actions_ == other.n_actions_ &&
               horizon_ == other.horizon_ && probs_ == other.probs_;
    }

  private:
    std::size_t n_states_;
    std::size_t n_actions_;
    std::size_t horizon_;
    std::vector<double> probs_;
};

/**
 * Episodic occupancy measure. per_step holds q_h(s, a) = Pr(s_h = s, a_h = a)
 * for each h (when retained); total holds d = sum_h q_h.
 */
struct OccupancyMeasure {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::size_t horizon = 0;
    std::vector<double> per_step; ///< [h][s][a]; empty when not retained
    std::vector<double> total;    ///< [s][a]

    bool has_per_step() const { return !per_step.empty(); }
    double q(std::size_t h, std::size_t s, std::size_t a) const {
        return per_step[(h * n_states + s) * n_actions + a];
    }
    double d(std::size_t s, std::size_t a) const { return total[s * n_actions + a]; }

    /// (1 - weight) * this + weight * other, including per-step tables when both
    /// carry them.
    OccupancyMeasure blend(const OccupancyMeasure& other, double weight) const;

    /// Drops per-step tables, keeping only d.
    OccupancyMeasure summed_only() const;
};

/// Forward dynamic programming: q_0 from mu and pi_0, q_{h+1} pushed through P_h.
OccupancyMeasure occupancy_of_policy(const TabularMDP& mdp, const TabularPolicy& policy);

/// sum_{s,a} r(s,a) d(s,a)
double value_from_occupancy(const OccupancyMeasure& d, const RewardTable& reward);

/// Exact V_i for every objective.
std::vector<double> exact_values(const TabularMDP& mdp, const TabularPolicy& policy);

/// Largest violation of the episodic flow constraints:
/// sum_a q_0(s,a) = mu(s) and sum_a q_{h+1}(s',a) = sum_{s,a} P_h(s'|s,a) q_h(s,a).
/// Requires per-step tables.
double flow_residual(const TabularMDP& mdp, const OccupancyMeasure& d);

struct PlanResult {
    TabularPolicy policy;
    double value = 0.0; ///< expected return under the initial distribution
};

/// Backward induction for a single reward table. Ties are broken toward the
/// lowest action index, so the returned deterministic policy is the
/// lexicographically first optimal one.
PlanResult backward_induction(const TabularMDP& mdp, const RewardTable& reward);

/// Elementwise combination sum_i w_i * rewards[i] over the first w.size() objectives.
RewardTable combine_rewards(const TabularMDP& mdp, const std::vector<double>& weights);

/// Random instance with rewards uniform in [0, 1]; transitions drawn from a
/// Dirichlet(1) per row.
TabularMDP random_tabular_mdp(std::size_t n_states, std::size_t n_actions, std::size_t horizon,
                              std::size_t n_objectives, std::uint64_t seed,
                              bool stationary = true);

/// EpisodicMDP adapter. Observations carry the state id plus features
/// one-hot(s) followed by h / H.
class TabularEnv final : public EpisodicMDP {
  public:
    explicit TabularEnv(TabularMDP mdp);

    std::size_t action_count() const override { return mdp_.n_actions; }
    std::size_t horizon() const override { return mdp_.horizon; }
    std::size_t reward_dim() const override { return mdp_.objectives(); }
    std::size_t observation_dim() const override { return mdp_.n_states + 1; }
    Observation reset(std::uint64_t seed) override;
    Transition step(std::size_t action) override;
    std::unique_ptr<EpisodicMDP> clone() const override;

    const TabularMDP& mdp() const { return mdp_; }
    Observation observe(std::size_t state, std::size_t h) const;

  private:
    TabularMDP mdp_;
    Rng rng_;
    std::size_t state_ = 0;
    std::size_t h_ = 0;
};

/// Tabulates a deterministic policy (e.g. a greedy Q policy) by querying it
/// at every (h, s) of the environment.
TabularPolicy tabulate_policy(const Policy& policy, const TabularEnv& env);

// Plain-text serialization. Format (whitespace separated, '#' starts a comment):
//
//   tabular_mdp 1
//   states S  actions A  horizon H  objectives K  stationary 0|1
//   initial   mu_0 ... mu_{S-1}
//   transition [h]          (once when stationary, else H blocks each with its h)
//     S*A rows of S probabilities, row (s, a) in order s-major
//   reward i                (K blocks)
//     S rows of A values
TabularMDP read_tabular_mdp(std::istream& in);
void write_tabular_mdp(std::ostream& out, const TabularMDP& mdp);
TabularMDP load_tabular_mdp(const std::string& path);
void save_tabular_mdp(const std::string& path, const TabularMDP& mdp);

// Policies use a matching format:
//   tabular_policy 1
//   states S actions A horizon H
//   H*S rows of A probabilities
TabularPolicy read_tabular_policy(std::istream& in);
void write_tabular_policy(std::ostream& out, const TabularPolicy& policy);

} // namespace morl
