#pragma once

#include "morl/regulator.hpp"
#include "morl/tabular.hpp"

#include <iosfwd>
#include <vector>

namespace morl {

/// g(v) = max_i (sign_i * v_i - alpha_i) over the constraints of a full value
/// vector (objective first).
double max_violation(std::span<const double> values, const ConstraintSpec& spec);

/// L(d, lambda) = <r_0, d> - lambda [g(d)]_+ for a scalar multiplier.
double reformulated_value(const TabularMDP& mdp, const OccupancyMeasure& d, double lambda,
                          const ConstraintSpec& spec);

/// Constraint indices attaining the max in g(d) (exact ties).
std::vector<std::size_t> active_constraints(const TabularMDP& mdp, const OccupancyMeasure& d,
                                            const ConstraintSpec& spec);

/// An element of the superdifferential of L(., lambda) at d: r_0 when g(d) <= 0,
/// otherwise r_0 - lambda * mean_{j in argmax} sign_j r_j.
RewardTable supergradient(const TabularMDP& mdp, const OccupancyMeasure& d, double lambda,
                          const ConstraintSpec& spec);

struct LmoResult {
    OccupancyMeasure occupancy;
    TabularPolicy policy;
    double value = 0.0;
};

/// Exact maximizer of <reward, d> over the occupancy polytope.
LmoResult lmo(const TabularMDP& mdp, const RewardTable& reward);

struct FwAtom {
    TabularPolicy policy;
    double weight = 0.0;
};

struct FwIteration {
    std::size_t w = 0;
    double step = 0.0; ///< alpha_w (0 on the terminating iteration)
    double value = 0.0; ///< L(x^(w))
    double gap = 0.0;
    std::vector<std::size_t> active;
};

struct FwResult {
    OccupancyMeasure x;
    TabularPolicy policy; ///< pi(a | s, h) read out of x
    std::vector<FwAtom> atoms;
    double value = 0.0; ///< L(x)
    double gap = 0.0;   ///< last duality gap; value <= max L <= value + gap
    std::size_t iterations = 0;
    std::vector<FwIteration> log;

    PolicyMixture mixture() const;
};

/**
 * Frank-Wolfe ascent on L(., lambda) from the uniform policy's occupancy with
 * alpha_w = 2 / (1 + w). Stops once the duality gap is <= eps or after
 * max_iterations LMO calls.
 */
FwResult fw_best_response(const TabularMDP& mdp, double lambda, const ConstraintSpec& spec,
                          std::size_t max_iterations, double eps);

/// pi_h(a | s) = q_h(s, a) / sum_a' q_h(s, a') when per-step tables are present,
/// otherwise the stationary readout of d; unvisited states act uniformly.
TabularPolicy policy_from_occupancy(const OccupancyMeasure& d);

/// Per-iteration CSV: w, alpha_w, L, gap, active (indices joined with ';').
void write_fw_log_csv(std::ostream& out, const std::vector<FwIteration>& log);

} // namespace morl
