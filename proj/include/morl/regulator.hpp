#pragma once

#include "morl/mdp_core.hpp"

#include <span>
#include <string>
#include <vector>

namespace morl {

/**
 * Constraint thresholds in canonical orientation: constraint i reads
 * sign_i * V_i <= alpha_i, where V_i is the episodic value of reward
 * component i (1-based in the reward vector). A lower bound V_i >= b is
 * expressed as sign_i = -1, alpha_i = -b.
 */
struct ConstraintSpec {
    std::vector<double> alpha;
    std::vector<double> sign;
    double cap = 1.0; ///< C, bound on ||lambda||_1
    std::vector<std::string> labels;

    std::size_t size() const { return alpha.size(); }
    void validate() const;

    /// All-"<=" constraints with default labels c1..cm.
    static ConstraintSpec upper_bounds(std::vector<double> alpha, double cap);
};

/// Multipliers; always a member of {lambda >= 0, ||lambda||_1 <= C}.
struct LagrangeWeights {
    std::vector<double> lambda;

    std::size_t size() const { return lambda.size(); }
    double l1() const;
    bool operator==(const LagrangeWeights&) const = default;
};

/// g_i = alpha_i - sign_i * v_{i}; positive means satisfied with slack.
/// `values` holds the full (m+1)-vector, objective first.
std::vector<double> compute_slacks(const ValueVector& values, const ConstraintSpec& spec);
std::vector<double> compute_slacks(std::span<const double> values, const ConstraintSpec& spec);

/// Euclidean projection onto {lambda >= 0, ||lambda||_1 <= spec.cap}.
/// Inputs already in the set are returned unchanged.
LagrangeWeights project_lambda(std::span<const double> v, const ConstraintSpec& spec);

/// One projected online-gradient step lambda <- Proj(lambda - eta * g).
LagrangeWeights ogd_step(const LagrangeWeights& lambda, std::span<const double> g, double eta,
                         const ConstraintSpec& spec);

/// l2 diameter of the multiplier set: C * sqrt(2) for m >= 2, C for m = 1.
double lambda_diameter(const ConstraintSpec& spec);

/// eta = D / (G sqrt(T)).
double theory_step_size(double diameter, double grad_bound, std::size_t rounds);

/// One round of the repeated game as seen by the regulator: the Lagrangian
/// at round t is objective + lambda . slack.
struct RoundLoss {
    double objective = 0.0;
    std::vector<double> slack;
    std::vector<double> lambda; ///< multiplier played in the round
};

/// sum_t L(D_t, lambda_t) - min_{lambda in Lambda} sum_t L(D_t, lambda). The
/// minimum of a linear function over Lambda is attained at 0 or at C e_i.
double realized_regret(std::span<const RoundLoss> rounds, double cap);

/// Exhaustive minimum over the vertices {0, C e_1, ..., C e_m}; test oracle
/// for realized_regret.
double min_total_loss_over_vertices(std::span<const RoundLoss> rounds, double cap);

} // namespace morl
