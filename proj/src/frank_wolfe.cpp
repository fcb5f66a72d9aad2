#include "morl/frank_wolfe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>

namespace morl {

double max_violation(std::span<const double> values, const ConstraintSpec& spec) {
    if (values.size() != spec.size() + 1) throw ValidationError("max_violation: need m + 1 values");
    if (spec.size() == 0) return -std::numeric_limits<double>::infinity();
    double g = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.size(); ++i) g = std::max(g, spec.sign[i] * values[i + 1] - spec.alpha[i]);
    return g;
}

namespace {

std::vector<double> occupancy_values(const TabularMDP& mdp, const OccupancyMeasure& d) {
    std::vector<double> v(mdp.objectives());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = value_from_occupancy(d, mdp.rewards[i]);
    return v;
}

void check_shapes(const TabularMDP& mdp, const ConstraintSpec& spec) {
    if (mdp.objectives() != spec.size() + 1)
        throw ValidationError("tabular MDP must carry one reward table per constraint plus the objective");
}

} // namespace

double reformulated_value(const TabularMDP& mdp, const OccupancyMeasure& d, double lambda,
                          const ConstraintSpec& spec) {
    check_shapes(mdp, spec);
    const auto v = occupancy_values(mdp, d);
    return v[0] - lambda * std::max(0.0, max_violation(v, spec));
}

std::vector<std::size_t> active_constraints(const TabularMDP& mdp, const OccupancyMeasure& d,
                                            const ConstraintSpec& spec) {
    check_shapes(mdp, spec);
    const auto v = occupancy_values(mdp, d);
    const double g = max_violation(v, spec);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < spec.size(); ++i)
        if (spec.sign[i] * v[i + 1] - spec.alpha[i] == g) out.push_back(i);
    return out;
}

RewardTable supergradient(const TabularMDP& mdp, const OccupancyMeasure& d, double lambda,
                          const ConstraintSpec& spec) {
    if (!(lambda >= 0.0)) throw ValidationError("supergradient: lambda must be non-negative");
    check_shapes(mdp, spec);
    const auto v = occupancy_values(mdp, d);
    RewardTable s = mdp.rewards[0];
    // at the kink g = 0 the feasible branch is taken
    if (!(max_violation(v, spec) > 0.0) || lambda == 0.0) return s;
    const auto active = active_constraints(mdp, d, spec);
    const double p = 1.0 / static_cast<double>(active.size());
    for (std::size_t j : active)
        for (std::size_t k = 0; k < s.size(); ++k) s[k] -= lambda * p * spec.sign[j] * mdp.rewards[j + 1][k];
    return s;
}

LmoResult lmo(const TabularMDP& mdp, const RewardTable& reward) {
    auto plan = backward_induction(mdp, reward);
    auto occ = occupancy_of_policy(mdp, plan.policy);
    return {std::move(occ), std::move(plan.policy), plan.value};
}

PolicyMixture FwResult::mixture() const {
    std::vector<PolicyPtr> members;
    std::vector<double> weights;
    double total = 0.0;
    for (const auto& a : atoms) total += a.weight;
    for (const auto& a : atoms) {
        members.push_back(std::make_shared<TabularPolicy>(a.policy));
        weights.push_back(a.weight / total);
    }
    return PolicyMixture(std::move(members), std::move(weights));
}

FwResult fw_best_response(const TabularMDP& mdp, double lambda, const ConstraintSpec& spec,
                          std::size_t max_iterations, double eps) {
    if (max_iterations == 0) throw ConfigError("fw: need at least one iteration");
    if (!(eps > 0.0)) throw ConfigError("fw: eps must be positive");
    if (!(lambda >= 0.0)) throw ValidationError("fw: lambda must be non-negative");
    check_shapes(mdp, spec);

    FwResult res;
    auto start = TabularPolicy::uniform(mdp.n_states, mdp.n_actions, mdp.horizon);
    res.x = occupancy_of_policy(mdp, start);
    if (flow_residual(mdp, res.x) > 1e-9) throw ValidationError("fw: infeasible initial occupancy");
    res.atoms.push_back({std::move(start), 1.0});

    for (std::size_t w = 1; w <= max_iterations; ++w) {
        const RewardTable s = supergradient(mdp, res.x, lambda, spec);
        LmoResult d = lmo(mdp, s);
        double gap = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) gap += s[k] * (d.occupancy.total[k] - res.x.total[k]);

        FwIteration it{w, 0.0, reformulated_value(mdp, res.x, lambda, spec), gap,
                       active_constraints(mdp, res.x, spec)};
        res.gap = gap;
        res.iterations = w;
        if (gap <= eps) {
            res.log.push_back(std::move(it));
            break;
        }
        const double alpha = 2.0 / (1.0 + static_cast<double>(w));
        it.step = alpha;
        res.log.push_back(std::move(it));

        res.x = res.x.blend(d.occupancy, alpha);
        for (auto& a : res.atoms) a.weight *= 1.0 - alpha;
        auto same = std::find_if(res.atoms.begin(), res.atoms.end(),
                                 [&](const FwAtom& a) { return a.policy == d.policy; });
        if (same != res.atoms.end())
            same->weight += alpha;
        else
            res.atoms.push_back({std::move(d.policy), alpha});
        std::erase_if(res.atoms, [](const FwAtom& a) { return a.weight == 0.0; });
    }
    res.value = reformulated_value(mdp, res.x, lambda, spec);
    res.policy = policy_from_occupancy(res.x);
    return res;
}

TabularPolicy policy_from_occupancy(const OccupancyMeasure& d) {
    const std::size_t S = d.n_states, A = d.n_actions, H = d.horizon;
    std::vector<double> probs(H * S * A);
    auto fill = [&](std::size_t h, std::size_t s, auto&& q) {
        double mass = 0.0;
        for (std::size_t a = 0; a < A; ++a) mass += q(a);
        for (std::size_t a = 0; a < A; ++a)
            probs[(h * S + s) * A + a] = mass > 0.0 ? q(a) / mass : 1.0 / static_cast<double>(A);
        if (mass > 0.0) {
            // renormalize against rounding so the row is stochastic to machine precision
            double sum = 0.0;
            for (std::size_t a = 0; a < A; ++a) sum += probs[(h * S + s) * A + a];
            for (std::size_t a = 0; a < A; ++a) probs[(h * S + s) * A + a] /= sum;
        }
    };
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s) {
            if (d.has_per_step())
                fill(h, s, [&](std::size_t a) { return d.q(h, s, a); });
            else
                fill(h, s, [&](std::size_t a) { return d.d(s, a); });
        }
    return TabularPolicy(S, A, H, std::move(probs));
}

void write_fw_log_csv(std::ostream& out, const std::vector<FwIteration>& log) {
    out << "w,alpha_w,L,gap,active\n";
    const auto old = out.precision(15);
    for (const auto& it : log) {
        out << it.w << ',' << it.step << ',' << it.value << ',' << it.gap << ',';
        for (std::size_t j = 0; j < it.active.size(); ++j) out << (j ? ";" : "") << it.active[j] + 1;
        out << '\n';
    }
    out.precision(old);
}

} // namespace morl
