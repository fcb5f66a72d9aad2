#include "morl/mdp_core.hpp"

#include <cmath>
#include <numeric>

namespace morl {

UniformRandomPolicy::UniformRandomPolicy(std::size_t n_actions) : n_actions_(n_actions) {
    if (n_actions == 0) throw ValidationError("UniformRandomPolicy: no actions");
}

std::size_t UniformRandomPolicy::act(const Observation&, std::size_t, Rng& rng) const {
    return std::uniform_int_distribution<std::size_t>(0, n_actions_ - 1)(rng);
}

PolicyMixture::PolicyMixture(PolicyPtr single) : members_{std::move(single)}, weights_{1.0} {}

PolicyMixture::PolicyMixture(std::vector<PolicyPtr> members, std::vector<double> weights)
    : members_(std::move(members)), weights_(std::move(weights)) {
    if (members_.empty()) throw ValidationError("PolicyMixture: no members");
    if (members_.size() != weights_.size())
        throw ValidationError("PolicyMixture: members and weights differ in length");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0)) throw ValidationError("PolicyMixture: negative weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ValidationError("PolicyMixture: weights must sum to 1");
}

PolicyMixture PolicyMixture::uniform(std::vector<PolicyPtr> members) {
    const std::size_t n = members.size();
    if (n == 0) throw ValidationError("PolicyMixture: no members");
    return {std::move(members), std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

std::size_t PolicyMixture::sample_index(Rng& rng) const {
    if (members_.size() == 1) return 0;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        acc += weights_[k];
        if (u < acc) return k;
    }
    // u landed in the rounding tail; return the last member with positive weight
    for (std::size_t k = weights_.size(); k-- > 0;)
        if (weights_[k] > 0.0) return k;
    return 0;
}

RewardVector Trajectory::returns() const {
    if (steps.empty()) return {};
    RewardVector out(steps.front().reward.size(), 0.0);
    for (const auto& s : steps)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += s.reward[i];
    return out;
}

ValueVector ValueVector::exact(std::vector<double> values) {
    ValueVector out;
    out.std_error.assign(values.size(), 0.0);
    out.v = std::move(values);
    out.episodes = 0;
    return out;
}

namespace {

void check_horizon(const EpisodicMDP& env) {
    if (env.horizon() == 0) throw ContractError("rollout: horizon 0 yields an empty trajectory");
}

template <class OnStep>
std::size_t run_episode(EpisodicMDP& env, const PolicyMixture& policy, std::uint64_t seed,
                        OnStep&& on_step) {
    Rng rng(derive_seed(seed, 1));
    const std::size_t member = policy.sample_index(rng);
    const Policy& pi = *policy.members()[member];
    Observation obs = env.reset(derive_seed(seed, 0));
    const std::size_t H = env.horizon();
    const std::size_t n_actions = env.action_count();
    for (std::size_t h = 0; h < H; ++h) {
        const std::size_t a = pi.act(obs, h, rng);
        if (a >= n_actions) throw ValidationError("policy returned an out-of-range action");
        Transition tr = env.step(a);
        on_step(obs, a, tr.reward);
        obs = std::move(tr.next);
    }
    return member;
}

} // namespace

Trajectory rollout(EpisodicMDP& env, const PolicyMixture& policy, std::uint64_t seed) {
    check_horizon(env);
    Trajectory traj;
    traj.steps.reserve(env.horizon());
    traj.member = run_episode(env, policy, seed,
                              [&](const Observation& o, std::size_t a, const RewardVector& r) {
                                  traj.steps.push_back({o, a, r});
                              });
    return traj;
}

std::vector<RewardVector> collect_returns(const EpisodicMDP& env, const PolicyMixture& policy,
                                          std::size_t n_episodes, std::uint64_t seed,
                                          std::size_t jobs) {
    check_horizon(env);
    const std::size_t dim = env.reward_dim();
    std::vector<RewardVector> out(n_episodes, RewardVector(dim, 0.0));
    jobs = std::max<std::size_t>(1, std::min(jobs, n_episodes));
    // one clone per worker slot; episodes are striped so each clone is used by
    // exactly one thread
    std::vector<std::unique_ptr<EpisodicMDP>> clones;
    for (std::size_t j = 0; j < jobs; ++j) clones.push_back(env.clone());
    parallel_for(jobs, jobs, [&](std::size_t w) {
        for (std::size_t e = w; e < n_episodes; e += jobs) {
            auto& ret = out[e];
            run_episode(*clones[w], policy, derive_seed(seed, e),
                        [&](const Observation&, std::size_t, const RewardVector& r) {
                            for (std::size_t i = 0; i < dim; ++i) ret[i] += r[i];
                        });
        }
    });
    return out;
}

ValueVector summarize_returns(std::span<const RewardVector> returns) {
    ValueVector out;
    if (returns.empty()) return out;
    const std::size_t dim = returns.front().size();
    const double n = static_cast<double>(returns.size());
    out.v.assign(dim, 0.0);
    out.std_error.assign(dim, 0.0);
    out.episodes = returns.size();
    for (const auto& r : returns)
        for (std::size_t i = 0; i < dim; ++i) out.v[i] += r[i];
    for (auto& x : out.v) x /= n;
    if (returns.size() > 1) {
        for (std::size_t i = 0; i < dim; ++i) {
            double ss = 0.0;
            for (const auto& r : returns) ss += (r[i] - out.v[i]) * (r[i] - out.v[i]);
            out.std_error[i] = std::sqrt(ss / (n - 1.0) / n);
        }
    }
    return out;
}

ValueVector estimate_values(const EpisodicMDP& env, const PolicyMixture& policy,
                            std::size_t n_episodes, std::uint64_t seed, std::size_t jobs) {
    if (n_episodes == 0) throw ValidationError("estimate_values: n_episodes must be >= 1");
    const auto returns = collect_returns(env, policy, n_episodes, seed, jobs);
    return summarize_returns(returns);
}

} // namespace morl
