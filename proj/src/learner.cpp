#include "morl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

namespace morl {

void ScalarizedSpec::validate() const {
    if (alpha.size() != lambda.size() || sign.size() != lambda.size())
        throw ValidationError("ScalarizedSpec: lambda, alpha and sign lengths differ");
    for (double l : lambda)
        if (!(l >= 0.0)) throw ValidationError("ScalarizedSpec: multipliers must be non-negative");
    if (!(horizon > 0.0)) throw ValidationError("ScalarizedSpec: horizon must be positive");
}

ScalarizedSpec ScalarizedSpec::from(const ConstraintSpec& spec, const LagrangeWeights& lambda,
                                    std::size_t horizon) {
    if (lambda.size() != spec.size()) throw ValidationError("ScalarizedSpec: dimension mismatch");
    ScalarizedSpec s{lambda.lambda, spec.alpha, spec.sign, static_cast<double>(horizon)};
    s.validate();
    return s;
}

ScalarizedSpec ScalarizedSpec::unconstrained(const ConstraintSpec& spec, std::size_t horizon) {
    return from(spec, LagrangeWeights{std::vector<double>(spec.size(), 0.0)}, horizon);
}

double scalarize(std::span<const double> reward, const ScalarizedSpec& spec) {
    const std::size_t m = spec.size();
    if (reward.size() != m + 1) throw ValidationError("scalarize: reward must have m + 1 entries");
    double out = reward[0];
    for (std::size_t i = 0; i < m; ++i) {
        if (!(spec.lambda[i] >= 0.0)) throw ValidationError("scalarize: negative multiplier");
        if (spec.lambda[i] != 0.0)
            out += spec.lambda[i] * (spec.alpha[i] / spec.horizon - spec.sign[i] * reward[i + 1]);
    }
    return out;
}

RewardTable scalarized_table(const TabularMDP& mdp, const ScalarizedSpec& spec) {
    spec.validate();
    if (mdp.objectives() != spec.size() + 1)
        throw ValidationError("scalarized_table: objective count mismatch");
    RewardTable table(mdp.sa_size());
    std::vector<double> r(spec.size() + 1);
    for (std::size_t k = 0; k < table.size(); ++k) {
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = mdp.rewards[i][k];
        table[k] = scalarize(r, spec);
    }
    return table;
}

void LearnerConfig::validate() const {
    if (episodes_per_round == 0 || replay_capacity == 0 || batch_size == 0 || target_sync == 0 ||
        train_every == 0)
        throw ConfigError("learner: counts must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learner: learning_rate must be positive");
    for (double e : {eps_start, eps_warm_start, eps_end})
        if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("learner: epsilon must lie in [0, 1]");
    if (!(eps_decay_fraction > 0.0 && eps_decay_fraction <= 1.0))
        throw ConfigError("learner: eps_decay_fraction must lie in (0, 1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("learner: gamma must lie in [0, 1]");
    if (!(reward_scale > 0.0) || !(huber_delta > 0.0))
        throw ConfigError("learner: reward_scale and huber_delta must be positive");
    for (int h : hidden)
        if (h <= 0) throw ConfigError("learner: hidden sizes must be positive");
}

std::size_t GreedyQPolicy::act(const Observation& obs, std::size_t, Rng&) const {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
        obs.features.data(), static_cast<Eigen::Index>(obs.features.size()));
    const Eigen::VectorXd q = net_->forward(x);
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < q.size(); ++a)
        if (q[a] > q[best]) best = a;
    return static_cast<std::size_t>(best);
}

namespace {

std::vector<int> layer_sizes(std::size_t in, const std::vector<int>& hidden, std::size_t out) {
    std::vector<int> sizes{static_cast<int>(in)};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(static_cast<int>(out));
    return sizes;
}

} // namespace

DqnLearner::DqnLearner(std::size_t observation_dim, std::size_t n_actions, LearnerConfig cfg)
    : cfg_(std::move(cfg)), obs_dim_(observation_dim), n_actions_(n_actions) {
    cfg_.validate();
    if (obs_dim_ == 0 || n_actions_ == 0) throw ConfigError("learner: empty observation or action space");
    reset(cfg_.seed);
}

void DqnLearner::reset(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x51));
    online_ = Mlp(layer_sizes(obs_dim_, cfg_.hidden, n_actions_), rng);
    target_ = online_;
    stored_ = head_ = 0;
    reward_dim_ = 0;
    obs_buf_.clear();
    next_buf_.clear();
    reward_buf_.clear();
    action_buf_.clear();
    terminal_buf_.clear();
    episodes_trained_ = updates_ = steps_ = 0;
}

std::shared_ptr<const GreedyQPolicy> DqnLearner::snapshot() const {
    return std::make_shared<const GreedyQPolicy>(std::make_shared<const Mlp>(online_));
}

void DqnLearner::remember(const std::vector<double>& obs, std::size_t action,
                          const RewardVector& reward, const std::vector<double>& next, bool terminal) {
    if (reward_dim_ == 0) {
        reward_dim_ = reward.size();
        const std::size_t cap = cfg_.replay_capacity;
        obs_buf_.assign(cap * obs_dim_, 0.0);
        next_buf_.assign(cap * obs_dim_, 0.0);
        reward_buf_.assign(cap * reward_dim_, 0.0);
        action_buf_.assign(cap, 0);
        terminal_buf_.assign(cap, 0);
    }
    if (reward.size() != reward_dim_) throw ValidationError("learner: reward dimension changed");
    std::copy(obs.begin(), obs.end(), obs_buf_.begin() + head_ * obs_dim_);
    std::copy(next.begin(), next.end(), next_buf_.begin() + head_ * obs_dim_);
    std::copy(reward.begin(), reward.end(), reward_buf_.begin() + head_ * reward_dim_);
    action_buf_[head_] = static_cast<int>(action);
    terminal_buf_[head_] = terminal;
    head_ = (head_ + 1) % cfg_.replay_capacity;
    stored_ = std::min(stored_ + 1, cfg_.replay_capacity);
}

double DqnLearner::update(const ScalarizedSpec& spec, Rng& rng) {
    const std::size_t B = cfg_.batch_size;
    const auto D = static_cast<Eigen::Index>(obs_dim_);
    Eigen::MatrixXd X(D, B), Xn(D, B);
    std::vector<int> actions(B);
    Eigen::VectorXd scalar(B);
    std::vector<char> terminal(B);
    std::uniform_int_distribution<std::size_t> pick(0, stored_ - 1);
    for (std::size_t j = 0; j < B; ++j) {
        const std::size_t k = pick(rng);
        X.col(j) = Eigen::Map<const Eigen::VectorXd>(&obs_buf_[k * obs_dim_], D);
        Xn.col(j) = Eigen::Map<const Eigen::VectorXd>(&next_buf_[k * obs_dim_], D);
        actions[j] = action_buf_[k];
        terminal[j] = terminal_buf_[k];
        scalar[j] = scalarize(std::span<const double>(&reward_buf_[k * reward_dim_], reward_dim_), spec);
    }
    const Eigen::MatrixXd qn = target_.forward_batch(Xn);
    Eigen::VectorXd y(B);
    for (std::size_t j = 0; j < B; ++j) {
        const double boot = terminal[j] ? 0.0 : qn.col(j).maxCoeff();
        y[j] = cfg_.reward_scale * scalar[j] + cfg_.gamma * boot;
    }
    const double loss = online_.train_step(X, actions, y, cfg_.learning_rate, cfg_.huber_delta);
    if (++updates_ % cfg_.target_sync == 0) target_.copy_weights_from(online_);
    return loss;
}

TrainResult DqnLearner::train(EpisodicMDP& env, const ScalarizedSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (env.observation_dim() != obs_dim_ || env.action_count() != n_actions_)
        throw ValidationError("learner: environment shape does not match the network");
    if (env.reward_dim() != spec.size() + 1)
        throw ValidationError("learner: reward dimension does not match the multipliers");
    if (!cfg_.warm_start && episodes_trained_ > 0) reset(derive_seed(seed, 0x52));

    Rng rng(derive_seed(seed, 0x53));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> random_action(0, n_actions_ - 1);

    const std::size_t E = cfg_.episodes_per_round;
    const double eps0 = episodes_trained_ > 0 ? cfg_.eps_warm_start : cfg_.eps_start;
    const double decay_eps = std::max(1.0, cfg_.eps_decay_fraction * static_cast<double>(E));

    TrainResult result;
    result.curve.reserve(E);
    for (std::size_t e = 0; e < E; ++e) {
        const double frac = std::min(1.0, static_cast<double>(e) / decay_eps);
        const double eps = eps0 + (cfg_.eps_end - eps0) * frac;

        Observation obs = env.reset(derive_seed(seed, e));
        CurvePoint point{episodes_trained_, 0.0, std::vector<double>(env.reward_dim(), 0.0)};
        for (std::size_t h = 0; h < env.horizon(); ++h) {
            std::size_t a;
            if (unif(rng) < eps) {
                a = random_action(rng);
            } else {
                const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
                    obs.features.data(), static_cast<Eigen::Index>(obs_dim_));
                const Eigen::VectorXd q = online_.forward(x);
                Eigen::Index best = 0;
                for (Eigen::Index k = 1; k < q.size(); ++k)
                    if (q[k] > q[best]) best = k;
                a = static_cast<std::size_t>(best);
            }
            Transition tr = env.step(a);
            const bool terminal = tr.terminal || h + 1 == env.horizon();
            remember(obs.features, a, tr.reward, tr.next.features, terminal);
            point.scalarized_return += scalarize(tr.reward, spec);
            for (std::size_t i = 0; i < tr.reward.size(); ++i) point.returns[i] += tr.reward[i];

            ++steps_;
            if (stored_ >= std::max(cfg_.batch_size, cfg_.warmup_steps) && steps_ % cfg_.train_every == 0) {
                const double loss = update(spec, rng);
                if (!std::isfinite(loss))
                    throw TrainingFailure(episodes_trained_, "learner: non-finite TD loss");
            }
            obs = std::move(tr.next);
            if (tr.terminal) break;
        }
        if (!online_.finite())
            throw TrainingFailure(episodes_trained_, "learner: non-finite network parameters");
        result.curve.push_back(std::move(point));
        ++episodes_trained_;
    }
    result.policy = snapshot();
    return result;
}

TrainResult train_best_response(EpisodicMDP& env, const ScalarizedSpec& spec,
                                const LearnerConfig& cfg) {
    DqnLearner learner(env.observation_dim(), env.action_count(), cfg);
    return learner.train(env, spec, cfg.seed);
}

double best_response_gap(const TabularMDP& mdp, const TabularPolicy& policy,
                         const ScalarizedSpec& spec) {
    const RewardTable table = scalarized_table(mdp, spec);
    const double best = backward_induction(mdp, table).value;
    return best - value_from_occupancy(occupancy_of_policy(mdp, policy), table);
}

double best_response_gap(const EpisodicMDP& env, const Policy& policy, const ScalarizedSpec& spec) {
    const auto* tab = dynamic_cast<const TabularEnv*>(&env);
    if (!tab) throw UnsupportedError("best_response_gap: requires a tabular environment");
    if (const auto* tp = dynamic_cast<const TabularPolicy*>(&policy))
        return best_response_gap(tab->mdp(), *tp, spec);
    return best_response_gap(tab->mdp(), tabulate_policy(policy, *tab), spec);
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
    const std::size_t k = curve.empty() ? 0 : curve.front().returns.size();
    out << "episode,scalarized_return";
    for (std::size_t i = 0; i < k; ++i) out << ",return_" << i;
    out << '\n';
    out.precision(12);
    for (const auto& p : curve) {
        out << p.episode << ',' << p.scalarized_return;
        for (double r : p.returns) out << ',' << r;
        out << '\n';
    }
}

void save_checkpoint(const std::string& path, const Mlp& net, std::uint64_t config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    net.save(out, config_hash);
}

Mlp load_checkpoint(const std::string& path, std::uint64_t* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("missing checkpoint " + path);
    Mlp net;
    const auto hash = net.load(in);
    if (config_hash) *config_hash = hash;
    return net;
}

} // namespace morl
