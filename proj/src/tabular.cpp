#include "morl/tabular.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace morl {

// *************************************************************************************
// **** TabularMDP
// *************************************************************************************

void TabularMDP::validate() const {
    if (n_states == 0 || n_actions == 0 || horizon == 0)
        throw ValidationError("TabularMDP: states, actions and horizon must be positive");
    const std::size_t blocks = stationary ? 1 : horizon;
    if (transitions.size() != blocks * n_states * n_actions * n_states)
        throw ValidationError("TabularMDP: transition tensor has the wrong size");
    if (initial.size() != n_states) throw ValidationError("TabularMDP: initial distribution size");
    if (rewards.empty()) throw ValidationError("TabularMDP: at least one reward table required");
    for (const auto& r : rewards) {
        if (r.size() != sa_size()) throw ValidationError("TabularMDP: reward table size");
        for (double x : r)
            if (!std::isfinite(x)) throw ValidationError("TabularMDP: non-finite reward");
    }
    auto check_row = [](const double* row, std::size_t n, const char* what) {
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (!(row[k] >= 0.0)) throw ValidationError(std::string(what) + ": negative entry");
            sum += row[k];
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw ValidationError(std::string(what) + ": row does not sum to 1");
    };
    check_row(initial.data(), n_states, "TabularMDP initial distribution");
    for (std::size_t row = 0; row < blocks * n_states * n_actions; ++row)
        check_row(transitions.data() + row * n_states, n_states, "TabularMDP transition");
}

RewardTable combine_rewards(const TabularMDP& mdp, const std::vector<double>& weights) {
    if (weights.size() > mdp.objectives())
        throw ValidationError("combine_rewards: more weights than objectives");
    RewardTable out(mdp.sa_size(), 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i)
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += weights[i] * mdp.rewards[i][k];
    return out;
}

TabularMDP random_tabular_mdp(std::size_t n_states, std::size_t n_actions, std::size_t horizon,
                              std::size_t n_objectives, std::uint64_t seed, bool stationary) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    TabularMDP mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.horizon = horizon;
    mdp.stationary = stationary;
    const std::size_t blocks = stationary ? 1 : horizon;
    mdp.transitions.resize(blocks * n_states * n_actions * n_states);
    for (std::size_t row = 0; row < blocks * n_states * n_actions; ++row) {
        double* p = mdp.transitions.data() + row * n_states;
        double sum = 0.0;
        for (std::size_t k = 0; k < n_states; ++k) sum += (p[k] = expo(rng));
        for (std::size_t k = 0; k < n_states; ++k) p[k] /= sum;
    }
    mdp.rewards.assign(n_objectives, RewardTable(n_states * n_actions));
    for (auto& r : mdp.rewards)
        for (auto& x : r) x = unif(rng);
    mdp.initial.resize(n_states);
    double sum = 0.0;
    for (auto& x : mdp.initial) sum += (x = expo(rng));
    for (auto& x : mdp.initial) x /= sum;
    return mdp;
}

// *************************************************************************************
// **** TabularPolicy
// *************************************************************************************

TabularPolicy::TabularPolicy(std::size_t n_states, std::size_t n_actions, std::size_t horizon,
                             std::vector<double> probs)
    : n_states_(n_states), n_actions_(n_actions), horizon_(horizon), probs_(std::move(probs)) {
    if (probs_.size() != n_states * n_actions * horizon)
        throw ValidationError("TabularPolicy: probability table has the wrong size");
    for (std::size_t row = 0; row < horizon * n_states; ++row) {
        double sum = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) {
            const double p = probs_[row * n_actions + a];
            if (!(p >= 0.0)) throw ValidationError("TabularPolicy: negative probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("TabularPolicy: action distribution does not sum to 1");
    }
}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions,
                                     std::size_t horizon) {
    return {n_states, n_actions, horizon,
            std::vector<double>(n_states * n_actions * horizon,
                                1.0 / static_cast<double>(n_actions))};
}

TabularPolicy TabularPolicy::deterministic(std::size_t n_states, std::size_t n_actions,
                                           std::size_t horizon,
                                           const std::vector<std::size_t>& choice) {
    if (choice.size() != n_states * horizon)
        throw ValidationError("TabularPolicy::deterministic: choice table has the wrong size");
    std::vector<double> probs(n_states * n_actions * horizon, 0.0);
    for (std::size_t row = 0; row < choice.size(); ++row) {
        if (choice[row] >= n_actions) throw ValidationError("TabularPolicy: action out of range");
        probs[row * n_actions + choice[row]] = 1.0;
    }
    return {n_states, n_actions, horizon, std::move(probs)};
}

std::size_t TabularPolicy::act(const Observation& obs, std::size_t step, Rng& rng) const {
    const std::size_t h = std::min(step, horizon_ - 1);
    const double* row = probs_.data() + (h * n_states_ + obs.state) * n_actions_;
    // deterministic rows do not consume randomness
    for (std::size_t a = 0; a < n_actions_; ++a)
        if (row[a] == 1.0) return a;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t a = 0; a < n_actions_; ++a) {
        if (row[a] > 0.0) last = a;
        acc += row[a];
        if (u < acc) return a;
    }
    return last;
}

// *************************************************************************************
// **** Occupancy measures
// *************************************************************************************

OccupancyMeasure OccupancyMeasure::blend(const OccupancyMeasure& other, double weight) const {
    OccupancyMeasure out = *this;
    for (std::size_t k = 0; k < total.size(); ++k)
        out.total[k] = (1.0 - weight) * total[k] + weight * other.total[k];
    if (has_per_step() && other.has_per_step()) {
        for (std::size_t k = 0; k < per_step.size(); ++k)
            out.per_step[k] = (1.0 - weight) * per_step[k] + weight * other.per_step[k];
    } else {
        out.per_step.clear();
    }
    return out;
}

OccupancyMeasure OccupancyMeasure::summed_only() const {
    OccupancyMeasure out = *this;
    out.per_step.clear();
    return out;
}

OccupancyMeasure occupancy_of_policy(const TabularMDP& mdp, const TabularPolicy& policy) {
    mdp.validate();
    const std::size_t S = mdp.n_states, A = mdp.n_actions, H = mdp.horizon;
    if (policy.n_states() != S || policy.n_actions() != A || policy.horizon() < H)
        throw ValidationError("occupancy_of_policy: policy shape does not match the MDP");
    OccupancyMeasure occ;
    occ.n_states = S;
    occ.n_actions = A;
    occ.horizon = H;
    occ.per_step.assign(H * S * A, 0.0);
    occ.total.assign(S * A, 0.0);
    std::vector<double> state_dist = mdp.initial;
    std::vector<double> next(S);
    for (std::size_t h = 0; h < H; ++h) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            if (state_dist[s] == 0.0) continue;
            for (std::size_t a = 0; a < A; ++a) {
                const double q = state_dist[s] * policy.prob(h, s, a);
                occ.per_step[(h * S + s) * A + a] = q;
                occ.total[s * A + a] += q;
                if (q == 0.0 || h + 1 == H) continue;
                for (std::size_t s2 = 0; s2 < S; ++s2) next[s2] += q * mdp.p(h, s, a, s2);
            }
        }
        state_dist.swap(next);
    }
    return occ;
}

double value_from_occupancy(const OccupancyMeasure& d, const RewardTable& reward) {
    if (reward.size() != d.total.size())
        throw ValidationError("value_from_occupancy: reward and occupancy shapes differ");
    double v = 0.0;
    for (std::size_t k = 0; k < reward.size(); ++k) v += reward[k] * d.total[k];
    return v;
}

std::vector<double> exact_values(const TabularMDP& mdp, const TabularPolicy& policy) {
    const auto occ = occupancy_of_policy(mdp, policy);
    std::vector<double> out;
    out.reserve(mdp.objectives());
    for (const auto& r : mdp.rewards) out.push_back(value_from_occupancy(occ, r));
    return out;
}

double flow_residual(const TabularMDP& mdp, const OccupancyMeasure& d) {
    if (!d.has_per_step()) throw ValidationError("flow_residual: per-step tables required");
    const std::size_t S = mdp.n_states, A = mdp.n_actions, H = mdp.horizon;
    double worst = 0.0;
    std::vector<double> inflow(S);
    for (std::size_t h = 0; h < H; ++h) {
        if (h == 0) {
            inflow = mdp.initial;
        } else {
            std::fill(inflow.begin(), inflow.end(), 0.0);
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a) {
                    const double q = d.q(h - 1, s, a);
                    for (std::size_t s2 = 0; s2 < S; ++s2) inflow[s2] += q * mdp.p(h - 1, s, a, s2);
                }
        }
        for (std::size_t s = 0; s < S; ++s) {
            double out = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                const double q = d.q(h, s, a);
                if (q < 0.0) worst = std::max(worst, -q);
                out += q;
            }
            worst = std::max(worst, std::abs(out - inflow[s]));
        }
    }
    return worst;
}

// *************************************************************************************
// **** Backward induction
// *************************************************************************************

PlanResult backward_induction(const TabularMDP& mdp, const RewardTable& reward) {
    mdp.validate();
    const std::size_t S = mdp.n_states, A = mdp.n_actions, H = mdp.horizon;
    if (reward.size() != S * A) throw ValidationError("backward_induction: reward table size");
    std::vector<double> value(S, 0.0), next_value(S, 0.0);
    std::vector<std::size_t> choice(H * S, 0);
    for (std::size_t h = H; h-- > 0;) {
        for (std::size_t s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_a = 0;
            for (std::size_t a = 0; a < A; ++a) {
                double q = reward[s * A + a];
                if (h + 1 < H)
                    for (std::size_t s2 = 0; s2 < S; ++s2) q += mdp.p(h, s, a, s2) * next_value[s2];
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            value[s] = best;
            choice[h * S + s] = best_a;
        }
        next_value.swap(value);
    }
    double v0 = 0.0;
    for (std::size_t s = 0; s < S; ++s) v0 += mdp.initial[s] * next_value[s];
    return {TabularPolicy::deterministic(S, A, H, choice), v0};
}

// *************************************************************************************
// **** TabularEnv
// *************************************************************************************

TabularEnv::TabularEnv(TabularMDP mdp) : mdp_(std::move(mdp)) { mdp_.validate(); }

Observation TabularEnv::observe(std::size_t state, std::size_t h) const {
    Observation obs;
    obs.state = state;
    obs.features.assign(mdp_.n_states + 1, 0.0);
    obs.features[state] = 1.0;
    obs.features[mdp_.n_states] = static_cast<double>(h) / static_cast<double>(mdp_.horizon);
    return obs;
}

namespace {
std::size_t sample_categorical(const double* p, std::size_t n, Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (p[k] > 0.0) last = k;
        acc += p[k];
        if (u < acc) return k;
    }
    return last;
}
} // namespace

Observation TabularEnv::reset(std::uint64_t seed) {
    rng_.seed(seed);
    state_ = sample_categorical(mdp_.initial.data(), mdp_.n_states, rng_);
    h_ = 0;
    return observe(state_, h_);
}

Transition TabularEnv::step(std::size_t action) {
    if (h_ >= mdp_.horizon) throw ContractError("TabularEnv: step after the episode ended");
    if (action >= mdp_.n_actions) throw ValidationError("TabularEnv: action out of range");
    Transition tr;
    tr.reward.resize(mdp_.objectives());
    for (std::size_t i = 0; i < mdp_.objectives(); ++i)
        tr.reward[i] = mdp_.rewards[i][state_ * mdp_.n_actions + action];
    const std::size_t base = mdp_.stationary ? 0 : h_ * mdp_.sa_size() * mdp_.n_states;
    const double* row =
        mdp_.transitions.data() + base + (state_ * mdp_.n_actions + action) * mdp_.n_states;
    state_ = sample_categorical(row, mdp_.n_states, rng_);
    ++h_;
    tr.terminal = h_ == mdp_.horizon;
    tr.next = observe(state_, h_);
    return tr;
}

std::unique_ptr<EpisodicMDP> TabularEnv::clone() const {
    return std::make_unique<TabularEnv>(*this);
}

TabularPolicy tabulate_policy(const Policy& policy, const TabularEnv& env) {
    const auto& mdp = env.mdp();
    std::vector<std::size_t> choice(mdp.horizon * mdp.n_states);
    Rng rng(0);
    for (std::size_t h = 0; h < mdp.horizon; ++h)
        for (std::size_t s = 0; s < mdp.n_states; ++s)
            choice[h * mdp.n_states + s] = policy.act(env.observe(s, h), h, rng);
    return TabularPolicy::deterministic(mdp.n_states, mdp.n_actions, mdp.horizon, choice);
}

// *************************************************************************************
// **** Text format
// *************************************************************************************

namespace {

/// Token reader that skips '#' comments.
class Tokens {
  public:
    explicit Tokens(std::istream& in) : in_(in) {}

    std::string word() {
        std::string w;
        while (in_ >> w) {
            if (w.front() == '#') {
                std::string rest;
                std::getline(in_, rest);
                continue;
            }
            return w;
        }
        throw ConfigError("tabular format: unexpected end of input");
    }
    void expect(const std::string& keyword) {
        const auto w = word();
        if (w != keyword)
            throw ConfigError("tabular format: expected '" + keyword + "', found '" + w + "'");
    }
    double number() {
        const auto w = word();
        try {
            std::size_t used = 0;
            const double x = std::stod(w, &used);
            if (used != w.size()) throw std::invalid_argument(w);
            return x;
        } catch (const std::exception&) {
            throw ConfigError("tabular format: expected a number, found '" + w + "'");
        }
    }
    std::size_t count() {
        const double x = number();
        if (x < 0 || x != std::floor(x)) throw ConfigError("tabular format: expected a count");
        return static_cast<std::size_t>(x);
    }

  private:
    std::istream& in_;
};

} // namespace

TabularMDP read_tabular_mdp(std::istream& in) {
    Tokens tok(in);
    tok.expect("tabular_mdp");
    if (tok.count() != 1) throw ConfigError("tabular_mdp: unsupported version");
    TabularMDP mdp;
    tok.expect("states");
    mdp.n_states = tok.count();
    tok.expect("actions");
    mdp.n_actions = tok.count();
    tok.expect("horizon");
    mdp.horizon = tok.count();
    tok.expect("objectives");
    const std::size_t K = tok.count();
    tok.expect("stationary");
    mdp.stationary = tok.count() != 0;
    tok.expect("initial");
    mdp.initial.resize(mdp.n_states);
    for (auto& x : mdp.initial) x = tok.number();
    const std::size_t blocks = mdp.stationary ? 1 : mdp.horizon;
    const std::size_t block_size = mdp.sa_size() * mdp.n_states;
    mdp.transitions.resize(blocks * block_size);
    for (std::size_t b = 0; b < blocks; ++b) {
        tok.expect("transition");
        if (!mdp.stationary && tok.count() != b)
            throw ConfigError("tabular_mdp: transition blocks out of order");
        for (std::size_t k = 0; k < block_size; ++k) mdp.transitions[b * block_size + k] = tok.number();
    }
    mdp.rewards.assign(K, RewardTable(mdp.sa_size()));
    for (std::size_t i = 0; i < K; ++i) {
        tok.expect("reward");
        if (tok.count() != i) throw ConfigError("tabular_mdp: reward blocks out of order");
        for (auto& x : mdp.rewards[i]) x = tok.number();
    }
    try {
        mdp.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("tabular_mdp: ") + e.what());
    }
    return mdp;
}

void write_tabular_mdp(std::ostream& out, const TabularMDP& mdp) {
    const auto old_precision = out.precision(17);
    out << "tabular_mdp 1\n";
    out << "states " << mdp.n_states << " actions " << mdp.n_actions << " horizon "
        << mdp.horizon << " objectives " << mdp.objectives() << " stationary "
        << (mdp.stationary ? 1 : 0) << "\n";
    out << "initial";
    for (double x : mdp.initial) out << ' ' << x;
    out << "\n";
    const std::size_t blocks = mdp.stationary ? 1 : mdp.horizon;
    for (std::size_t b = 0; b < blocks; ++b) {
        out << "transition";
        if (!mdp.stationary) out << ' ' << b;
        out << "\n";
        for (std::size_t s = 0; s < mdp.n_states; ++s)
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                out << " ";
                for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) out << ' ' << mdp.p(b, s, a, s2);
                out << "   # s=" << s << " a=" << a << "\n";
            }
    }
    for (std::size_t i = 0; i < mdp.objectives(); ++i) {
        out << "reward " << i << "\n";
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            out << " ";
            for (std::size_t a = 0; a < mdp.n_actions; ++a)
                out << ' ' << mdp.rewards[i][s * mdp.n_actions + a];
            out << "\n";
        }
    }
    out.precision(old_precision);
}

TabularMDP load_tabular_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open tabular MDP file: " + path);
    return read_tabular_mdp(in);
}

void save_tabular_mdp(const std::string& path, const TabularMDP& mdp) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write tabular MDP file: " + path);
    write_tabular_mdp(out, mdp);
}

TabularPolicy read_tabular_policy(std::istream& in) {
    Tokens tok(in);
    tok.expect("tabular_policy");
    if (tok.count() != 1) throw ConfigError("tabular_policy: unsupported version");
    tok.expect("states");
    const std::size_t S = tok.count();
    tok.expect("actions");
    const std::size_t A = tok.count();
    tok.expect("horizon");
    const std::size_t H = tok.count();
    std::vector<double> probs(S * A * H);
    for (auto& x : probs) x = tok.number();
    try {
        return {S, A, H, std::move(probs)};
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("tabular_policy: ") + e.what());
    }
}

void write_tabular_policy(std::ostream& out, const TabularPolicy& policy) {
    const auto old_precision = out.precision(17);
    out << "tabular_policy 1\n";
    out << "states " << policy.n_states() << " actions " << policy.n_actions() << " horizon "
        << policy.horizon() << "\n";
    for (std::size_t h = 0; h < policy.horizon(); ++h)
        for (std::size_t s = 0; s < policy.n_states(); ++s) {
            for (std::size_t a = 0; a < policy.n_actions(); ++a)
                out << (a ? " " : "") << policy.prob(h, s, a);
            out << "\n";
        }
    out.precision(old_precision);
}

} // namespace morl
