#include "morl/regulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace morl {

void ConstraintSpec::validate() const {
    if (!(cap > 0.0)) throw ConfigError("ConstraintSpec: cap C must be positive");
    if (sign.size() != alpha.size())
        throw ConfigError("ConstraintSpec: alpha and sign lengths differ");
    if (labels.size() != alpha.size())
        throw ConfigError("ConstraintSpec: one label per constraint required");
    for (double s : sign)
        if (s != 1.0 && s != -1.0) throw ConfigError("ConstraintSpec: sign entries must be +1 or -1");
}

ConstraintSpec ConstraintSpec::upper_bounds(std::vector<double> alpha, double cap) {
    ConstraintSpec spec;
    spec.sign.assign(alpha.size(), 1.0);
    for (std::size_t i = 0; i < alpha.size(); ++i) spec.labels.push_back("c" + std::to_string(i + 1));
    spec.alpha = std::move(alpha);
    spec.cap = cap;
    return spec;
}

double LagrangeWeights::l1() const {
    double s = 0.0;
    for (double x : lambda) s += std::abs(x);
    return s;
}

std::vector<double> compute_slacks(std::span<const double> values, const ConstraintSpec& spec) {
    const std::size_t m = spec.size();
    if (values.size() != m + 1)
        throw ValidationError("compute_slacks: value vector must have m + 1 entries");
    std::vector<double> g(m);
    for (std::size_t i = 0; i < m; ++i) g[i] = spec.alpha[i] - spec.sign[i] * values[i + 1];
    return g;
}

std::vector<double> compute_slacks(const ValueVector& values, const ConstraintSpec& spec) {
    return compute_slacks(std::span<const double>(values.v), spec);
}

namespace {

bool in_lambda_set(std::span<const double> v, double cap) {
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= 0.0) || std::signbit(x)) return false;
        sum += x;
    }
    return sum <= cap;
}

} // namespace

LagrangeWeights project_lambda(std::span<const double> v, const ConstraintSpec& spec) {
    const double C = spec.cap;
    LagrangeWeights out{std::vector<double>(v.begin(), v.end())};
    if (in_lambda_set(v, C)) return out;

    for (auto& x : out.lambda) x = x > 0.0 ? x : 0.0;
    double sum = std::accumulate(out.lambda.begin(), out.lambda.end(), 0.0);
    if (sum > C) {
        // sorted-threshold projection onto {x >= 0, sum x = C}
        std::vector<double> u = out.lambda;
        std::sort(u.begin(), u.end(), std::greater<>());
        double prefix = 0.0, theta = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            prefix += u[j];
            const double t = (prefix - C) / static_cast<double>(j + 1);
            if (u[j] - t > 0.0) theta = t;
        }
        for (auto& x : out.lambda) x = x - theta > 0.0 ? x - theta : 0.0;
        // rounding can leave the sum a few ulps above C; shave the largest entry
        sum = std::accumulate(out.lambda.begin(), out.lambda.end(), 0.0);
        while (sum > C) {
            auto it = std::max_element(out.lambda.begin(), out.lambda.end());
            *it = std::max(0.0, std::nextafter(*it - (sum - C), 0.0));
            sum = std::accumulate(out.lambda.begin(), out.lambda.end(), 0.0);
        }
    }
    return out;
}

LagrangeWeights ogd_step(const LagrangeWeights& lambda, std::span<const double> g, double eta,
                         const ConstraintSpec& spec) {
    if (!(eta > 0.0)) throw ValidationError("ogd_step: eta must be positive");
    if (g.size() != lambda.size()) throw ValidationError("ogd_step: dimension mismatch");
    std::vector<double> v(lambda.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = lambda.lambda[i] - eta * g[i];
    return project_lambda(v, spec);
}

double lambda_diameter(const ConstraintSpec& spec) {
    return spec.size() >= 2 ? spec.cap * std::sqrt(2.0) : spec.cap;
}

double theory_step_size(double diameter, double grad_bound, std::size_t rounds) {
    if (!(diameter > 0.0) || !(grad_bound > 0.0) || rounds == 0)
        throw ValidationError("theory_step_size: D, G and T must be positive");
    return diameter / (grad_bound * std::sqrt(static_cast<double>(rounds)));
}

double realized_regret(std::span<const RoundLoss> rounds, double cap) {
    if (rounds.empty()) throw ValidationError("realized_regret: empty trace");
    const std::size_t m = rounds.front().slack.size();
    double played = 0.0;
    std::vector<double> slack_sum(m, 0.0);
    for (const auto& r : rounds) {
        if (r.slack.size() != m || r.lambda.size() != m)
            throw ValidationError("realized_regret: inconsistent dimensions");
        for (std::size_t i = 0; i < m; ++i) {
            played += r.lambda[i] * r.slack[i];
            slack_sum[i] += r.slack[i];
        }
    }
    // objective terms cancel between the two sums
    const double most_violated = m ? *std::min_element(slack_sum.begin(), slack_sum.end()) : 0.0;
    return played - std::min(0.0, cap * most_violated);
}

double min_total_loss_over_vertices(std::span<const RoundLoss> rounds, double cap) {
    const std::size_t m = rounds.empty() ? 0 : rounds.front().slack.size();
    double base = 0.0;
    for (const auto& r : rounds) base += r.objective;
    double best = base; // lambda = 0
    for (std::size_t i = 0; i < m; ++i) {
        double total = base;
        for (const auto& r : rounds) total += cap * r.slack[i];
        best = std::min(best, total);
    }
    return best;
}

} // namespace morl
