#include "morl/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace morl {

void ReformSpec::validate() const {
    constraints.validate();
    if (!(epsilon > 0.0)) throw ValidationError("ReformSpec: epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("ReformSpec: delta must lie in (0, 1)");
    if (horizon == 0 || rounds == 0) throw ValidationError("ReformSpec: H and T must be positive");
    if (!(lambda_bar >= 0.0)) throw ValidationError("ReformSpec: lambda_bar must be non-negative");
    for (double a : constraints.alpha)
        if (std::abs(a) > static_cast<double>(horizon))
            throw ValidationError("ReformSpec: thresholds must lie in [-H, H]");
}

Violation positive_part_violation(std::span<const double> values, const ConstraintSpec& spec) {
    const double g = max_violation(values, spec);
    return {g, std::max(0.0, g)};
}

Violation positive_part_violation(const ValueVector& values, const ConstraintSpec& spec) {
    return positive_part_violation(std::span<const double>(values.v), spec);
}

double reformulated_lagrangian(double v0, double g_plus, double lambda) {
    if (!(lambda >= 0.0) || !(g_plus >= 0.0))
        throw ValidationError("reformulated_lagrangian: lambda and g_plus must be non-negative");
    return v0 - lambda * g_plus;
}

std::uint64_t required_samples(double lambda_bar, double horizon, double epsilon, double delta,
                               std::size_t rounds) {
    if (!(epsilon > 0.0)) throw ValidationError("required_samples: epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("required_samples: delta must lie in (0, 1)");
    if (rounds == 0 || !(horizon > 0.0) || !(lambda_bar >= 0.0))
        throw ValidationError("required_samples: need T >= 1, H > 0, lambda >= 0");
    const long double a = 1.0L + 2.0L * lambda_bar;
    const long double bound = a * a * horizon * horizon / (2.0L * epsilon * epsilon) *
                              std::log(2.0L * static_cast<long double>(rounds) / delta);
    return static_cast<std::uint64_t>(std::ceil(bound));
}

std::uint64_t required_samples(const ReformSpec& spec) {
    spec.validate();
    return required_samples(spec.lambda_bar, static_cast<double>(spec.horizon), spec.epsilon,
                            spec.delta, spec.rounds);
}

double bridge_lambda(const LagrangeWeights& lambda) { return lambda.l1(); }

IterateSelection select_best_iterate(const std::vector<PolicyMixture>& iterates,
                                     double lambda_bar, const ConstraintSpec& spec,
                                     const EpisodicMDP& env, std::size_t n, std::uint64_t seed,
                                     std::size_t jobs) {
    if (iterates.empty()) throw ContractError("select_best_iterate: no iterates");
    if (n == 0) throw ValidationError("select_best_iterate: n must be positive");
    IterateSelection sel;
    for (std::size_t t = 0; t < iterates.size(); ++t) {
        const auto v = estimate_values(env, iterates[t], n, derive_seed(seed, t + 1), jobs);
        const auto viol = positive_part_violation(v, spec);
        sel.table.push_back({t + 1, v.v, viol.g, reformulated_lagrangian(v[0], viol.g_plus, lambda_bar), n});
    }
    std::size_t best = 0;
    for (std::size_t t = 1; t < sel.table.size(); ++t)
        if (sel.table[t].l_hat > sel.table[best].l_hat) best = t;
    sel.t_star = best + 1;
    return sel;
}

double jensen_gap(double mixture_value, std::span<const double> iterate_values) {
    if (iterate_values.empty()) throw ValidationError("jensen_gap: no iterates");
    double mean = 0.0;
    for (double v : iterate_values) mean += v;
    return mixture_value - mean / static_cast<double>(iterate_values.size());
}

// *************************************************************************************

double ReformTrace::lambda_bar() const {
    if (rounds.empty()) throw ContractError("lambda_bar: empty trace");
    double s = 0.0;
    for (const auto& r : rounds) s += r.lambda;
    return s / static_cast<double>(rounds.size());
}

std::vector<double> ReformTrace::average_values() const {
    if (rounds.empty()) throw ContractError("average_values: empty trace");
    std::vector<double> avg(rounds.front().values.size(), 0.0);
    for (const auto& r : rounds)
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += r.values[i];
    for (auto& x : avg) x /= static_cast<double>(rounds.size());
    return avg;
}

std::vector<PolicyMixture> ReformTrace::iterates() const {
    std::vector<PolicyMixture> out;
    for (const auto& r : rounds) out.emplace_back(std::make_shared<TabularPolicy>(r.policy));
    return out;
}

ReformTrace run_reformulated_game(const TabularMDP& mdp, const ConstraintSpec& spec,
                                  const ReformGameSettings& settings) {
    spec.validate();
    if (settings.rounds == 0) throw ConfigError("reformulated game: rounds must be positive");
    const double C = spec.cap;
    const double eta = settings.eta > 0.0
                           ? settings.eta
                           : theory_step_size(C, settings.grad_bound, settings.rounds);
    // one-dimensional multiplier set [0, C]
    const ConstraintSpec scalar_set = ConstraintSpec::upper_bounds({0.0}, C);

    ReformTrace trace;
    trace.spec = spec;
    trace.eta = eta;
    LagrangeWeights lambda{{0.0}};
    for (std::size_t t = 1; t <= settings.rounds; ++t) {
        auto fw = fw_best_response(mdp, lambda.lambda[0], spec, settings.fw_iterations, settings.fw_eps);
        ReformRound r;
        r.lambda = lambda.lambda[0];
        r.values = exact_values(mdp, fw.policy);
        r.g_plus = positive_part_violation(r.values, spec).g_plus;
        r.fw_gap = fw.gap;
        r.fw_iterations = fw.iterations;
        r.policy = std::move(fw.policy);
        // the regulator minimizes V_0 - lambda [g]_+, whose gradient in lambda is -[g]_+
        const double grad[] = {-r.g_plus};
        lambda = ogd_step(lambda, grad, eta, scalar_set);
        trace.rounds.push_back(std::move(r));
    }
    return trace;
}

double reformulated_max(const TabularMDP& mdp, double lambda, const ConstraintSpec& spec) {
    if (!(lambda >= 0.0)) throw ValidationError("reformulated_max: lambda must be non-negative");
    if (lambda == 0.0 || spec.size() == 0) return backward_induction(mdp, mdp.rewards[0]).value;
    if (spec.size() == 1) {
        // phi(theta) = max_d <r_0 - theta lambda s r_1, d> + theta lambda alpha; convex in theta,
        // and every value bounds max_d L(d, lambda) from above
        auto phi = [&](double theta) {
            RewardTable r = mdp.rewards[0];
            for (std::size_t k = 0; k < r.size(); ++k) r[k] -= theta * lambda * spec.sign[0] * mdp.rewards[1][k];
            return backward_induction(mdp, r).value + theta * lambda * spec.alpha[0];
        };
        double lo = 0.0, hi = 1.0;
        double best = std::min(phi(0.0), phi(1.0));
        for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
            const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            const double f1 = phi(m1), f2 = phi(m2);
            best = std::min({best, f1, f2});
            if (f1 <= f2)
                hi = m2;
            else
                lo = m1;
        }
        return best;
    }
    const auto fw = fw_best_response(mdp, lambda, spec, 20000, 1e-9);
    return fw.value + std::max(0.0, fw.gap);
}

ExtractionCertificate extraction_certificate(const TabularMDP& mdp, const ConstraintSpec& spec,
                                             const std::vector<TabularPolicy>& iterates,
                                             double lambda_bar, std::size_t n, std::uint64_t seed,
                                             std::size_t jobs) {
    if (iterates.empty()) throw ContractError("certificate: no iterates");
    if (!(lambda_bar >= 0.0) || lambda_bar > spec.cap)
        throw ValidationError("certificate: lambda_bar must lie in [0, C]");
    const double C = spec.cap;
    ExtractionCertificate cert;
    cert.lambda_bar = lambda_bar;
    cert.samples = n;
    const double lb = lambda_bar;

    auto L = [&](std::span<const double> v, double lambda) {
        return reformulated_lagrangian(v[0], positive_part_violation(v, spec).g_plus, lambda);
    };

    std::vector<double> vbar(mdp.objectives(), 0.0);
    std::vector<PolicyMixture> mixes;
    for (const auto& pi : iterates) {
        const auto v = exact_values(mdp, pi);
        cert.exact_l.push_back(L(v, lb));
        cert.exact_g_plus.push_back(positive_part_violation(v, spec).g_plus);
        for (std::size_t i = 0; i < v.size(); ++i) vbar[i] += v[i] / static_cast<double>(iterates.size());
        mixes.emplace_back(std::make_shared<TabularPolicy>(pi));
    }
    TabularEnv env(mdp);
    const auto sel = select_best_iterate(mixes, lb, spec, env, n, seed, jobs);
    cert.table = sel.table;
    cert.t_star = sel.t_star;
    cert.l_tstar = cert.exact_l[sel.t_star - 1];
    cert.certifying_policy = iterates[sel.t_star - 1];

    cert.epsilon = 0.0;
    for (std::size_t t = 0; t < cert.table.size(); ++t)
        cert.epsilon = std::max(cert.epsilon, std::abs(cert.table[t].l_hat - cert.exact_l[t]));

    const double l_bar = L(vbar, lb);
    cert.jensen = jensen_gap(l_bar, cert.exact_l);

    // approximate-equilibrium gaps of (D-bar, lambda-bar)
    const double best_vs_lbar = reformulated_max(mdp, lb, spec);
    const double worst_lambda = L(vbar, C); // L(D-bar, .) is nonincreasing in lambda
    cert.nu = std::max(best_vs_lbar - l_bar, l_bar - worst_lambda);

    // L* = min over lambda of max_D L(D, lambda), convex in lambda: grid of step
    // 1e-3 C, then a ternary refinement around the best grid point
    auto ub = [&](double lambda) { return reformulated_max(mdp, lambda, spec); };
    double l_star = best_vs_lbar;
    int best_k = 0;
    double best_grid = ub(0.0);
    for (int k = 1; k <= 1000; ++k) {
        const double u = ub(C * k / 1000.0);
        if (u < best_grid) {
            best_grid = u;
            best_k = k;
        }
    }
    l_star = std::min(l_star, best_grid);
    double lo = C * std::max(0, best_k - 1) / 1000.0, hi = C * std::min(1000, best_k + 1) / 1000.0;
    for (int iter = 0; iter < 60; ++iter) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        const double f1 = ub(m1), f2 = ub(m2);
        l_star = std::min({l_star, f1, f2});
        if (f1 <= f2)
            hi = m2;
        else
            lo = m1;
    }
    cert.l_star = l_star;

    cert.holds = cert.l_tstar >= cert.rhs();
    return cert;
}

ExtractionCertificate extraction_certificate(const TabularMDP& mdp, const ReformTrace& trace,
                                             std::size_t n, std::uint64_t seed, std::size_t jobs) {
    if (trace.rounds.empty()) throw ContractError("certificate: empty trace");
    std::vector<TabularPolicy> iterates;
    for (const auto& r : trace.rounds) iterates.push_back(r.policy);
    return extraction_certificate(mdp, trace.spec, iterates, trace.lambda_bar(), n, seed, jobs);
}

void write_certificate(std::ostream& out, const ExtractionCertificate& cert) {
    const auto old = out.precision(12);
    out << "single-iterate extraction certificate\n"
        << "lambda_bar        " << cert.lambda_bar << '\n'
        << "episodes_per_iter " << cert.samples << '\n'
        << "t_star            " << cert.t_star << '\n'
        << "L(D_t*, lambda)   " << cert.l_tstar << '\n'
        << "L_star            " << cert.l_star << '\n'
        << "nu                " << cert.nu << '\n'
        << "epsilon           " << cert.epsilon << '\n'
        << "jensen_gap        " << cert.jensen << '\n'
        << "bound             " << cert.rhs() << '\n'
        << "holds             " << (cert.holds ? "yes" : "no") << '\n'
        << "per-iterate exact L and [g]_+ (reported only; no violation bound is asserted)\n";
    for (std::size_t t = 0; t < cert.exact_l.size(); ++t)
        out << "  t=" << t + 1 << "  L=" << cert.exact_l[t] << "  g_plus=" << cert.exact_g_plus[t] << '\n';
    out.precision(old);
}

void write_estimates_csv(std::ostream& out, const std::vector<IterateEstimate>& table) {
    out << "t,v0_hat,g_hat,l_hat,n\n";
    const auto old = out.precision(12);
    for (const auto& e : table) out << e.round << ',' << e.v[0] << ',' << e.g_hat << ',' << e.l_hat << ',' << e.episodes << '\n';
    out.precision(old);
}

// *************************************************************************************

CancellationReport cancellation_report(const TabularMDP& mdp, const ConstraintSpec& spec,
                                       const std::vector<TabularPolicy>& members,
                                       const std::vector<double>& weights) {
    if (members.empty() || members.size() != weights.size())
        throw ValidationError("cancellation_report: one weight per member required");
    CancellationReport rep;
    std::vector<double> avg(mdp.objectives(), 0.0);
    for (std::size_t k = 0; k < members.size(); ++k) {
        auto v = exact_values(mdp, members[k]);
        rep.member_positive_part.push_back(positive_part_violation(v, spec).g_plus);
        for (std::size_t i = 0; i < v.size(); ++i) avg[i] += weights[k] * v[i];
        rep.member_values.push_back(std::move(v));
    }
    rep.mixture_signed_violation = positive_part_violation(avg, spec).g;
    return rep;
}

TabularMDP safe_left_right_mdp(std::size_t horizon) {
    TabularMDP mdp;
    mdp.n_states = 3;
    mdp.n_actions = 3;
    mdp.horizon = horizon;
    mdp.stationary = true;
    mdp.transitions.assign(3 * 3 * 3, 0.0);
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t a = 0; a < 3; ++a) mdp.p_mut(0, s, a, a) = 1.0;
    const double side[3] = {0.0, 1.0, 1.0};
    const double signal[3] = {0.0, -1.0, 1.0};
    RewardTable r0(9), c(9), neg(9);
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t a = 0; a < 3; ++a) {
            r0[s * 3 + a] = side[s];
            c[s * 3 + a] = signal[s];
            neg[s * 3 + a] = -signal[s];
        }
    mdp.rewards = {r0, c, neg};
    mdp.initial = {1.0, 0.0, 0.0};
    mdp.validate();
    return mdp;
}

ConstraintSpec safe_left_right_constraints(double cap) {
    auto spec = ConstraintSpec::upper_bounds({0.0, 0.0}, cap);
    spec.labels = {"signal", "-signal"};
    return spec;
}

} // namespace morl
