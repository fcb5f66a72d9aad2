#pragma once

#include "morl/frank_wolfe.hpp"
#include "morl/mdp_core.hpp"
#include "morl/regulator.hpp"
#include "morl/tabular.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace morl {

/// Constraint thresholds plus the knobs of the concentration lemma. The
/// multiplier is a scalar on the aggregated violation [g]_+.
struct ReformSpec {
    ConstraintSpec constraints; ///< alpha, sign and the cap C on lambda
    double lambda_bar = 0.0;
    std::size_t horizon = 1;
    double epsilon = 0.5;
    double delta = 0.05;
    std::size_t rounds = 1;

    void validate() const;
};

struct Violation {
    double g = 0.0;
    double g_plus = 0.0;
};

/// g = max_i (sign_i v_i - alpha_i) and its positive part. `values` is the full
/// (m+1)-vector, objective first.
Violation positive_part_violation(std::span<const double> values, const ConstraintSpec& spec);
Violation positive_part_violation(const ValueVector& values, const ConstraintSpec& spec);

/// V0 - lambda * g_plus
double reformulated_lagrangian(double v0, double g_plus, double lambda);

/// Smallest n with n >= (1 + 2 lambda)^2 H^2 / (2 eps^2) ln(2T / delta).
std::uint64_t required_samples(double lambda_bar, double horizon, double epsilon, double delta,
                               std::size_t rounds);
std::uint64_t required_samples(const ReformSpec& spec);

/// Collapses an m-vector of multipliers to the scalar used by the
/// reformulated game (its l1 norm).
double bridge_lambda(const LagrangeWeights& lambda);

struct IterateEstimate {
    std::size_t round = 0; ///< 1-based
    std::vector<double> v; ///< V-hat_0..V-hat_m
    double g_hat = 0.0;
    double l_hat = 0.0;
    std::size_t episodes = 0;
};

struct IterateSelection {
    std::size_t t_star = 0; ///< 1-based; ties go to the earliest round
    std::vector<IterateEstimate> table;
};

/// Monte Carlo estimate of L(D_t, lambda_bar) for each round's strategy from n
/// episodes (one member drawn per episode), and the argmax round.
IterateSelection select_best_iterate(const std::vector<PolicyMixture>& iterates,
                                     double lambda_bar, const ConstraintSpec& spec,
                                     const EpisodicMDP& env, std::size_t n, std::uint64_t seed,
                                     std::size_t jobs = 1);

/// L(D-bar, lambda) - mean_t L(D_t, lambda)
double jensen_gap(double mixture_value, std::span<const double> iterate_values);

// *************************************************************************************
// **** Reformulated repeated game on tabular instances
// *************************************************************************************

struct ReformRound {
    double lambda = 0.0;         ///< multiplier played against D_t
    TabularPolicy policy;        ///< D_t, the Frank-Wolfe readout
    std::vector<double> values;  ///< exact V_0..V_m of D_t
    double g_plus = 0.0;
    double fw_gap = 0.0;
    std::size_t fw_iterations = 0;
};

struct ReformTrace {
    ConstraintSpec spec;
    std::vector<ReformRound> rounds;
    double eta = 0.0;

    double lambda_bar() const;
    std::vector<double> average_values() const;
    std::vector<PolicyMixture> iterates() const;
};

struct ReformGameSettings {
    std::size_t rounds = 20;
    double eta = 0.0; ///< 0 selects C / (G sqrt(T)) with G = grad_bound
    double grad_bound = 1.0;
    std::size_t fw_iterations = 10000;
    double fw_eps = 1e-3;
};

/// Learner: Frank-Wolfe best response to lambda_{t-1}; regulator: projected
/// OGD on [0, C] with loss -lambda [g(D_t)]_+.
ReformTrace run_reformulated_game(const TabularMDP& mdp, const ConstraintSpec& spec,
                                  const ReformGameSettings& settings);

/// Upper bound on max_D L(D, lambda) that is exact (up to the search tolerance)
/// for one constraint: min over theta in [0, 1] of the dual function. With
/// several constraints, the Frank-Wolfe value plus its duality gap.
double reformulated_max(const TabularMDP& mdp, double lambda, const ConstraintSpec& spec);

struct ExtractionCertificate {
    double l_star = 0.0;
    double nu = 0.0;
    double epsilon = 0.0; ///< measured max_t |L-hat - L|
    double jensen = 0.0;
    std::size_t t_star = 0;
    double l_tstar = 0.0; ///< exact L(D_{t*}, lambda-bar)
    double lambda_bar = 0.0;
    std::size_t samples = 0;
    bool holds = false;
    std::vector<IterateEstimate> table;
    std::vector<double> exact_l; ///< L(D_t, lambda-bar) per round
    std::vector<double> exact_g_plus;
    TabularPolicy certifying_policy;

    double rhs() const { return l_star - (nu + 2.0 * epsilon + jensen); }
};

/// Runs selection with n episodes per round and measures every quantity in
/// L(D_{t*}, lambda-bar) >= L* - (nu + 2 eps + J) exactly on the tabular game.
/// `iterates` are the round strategies D_t; lambda_bar is the scalar multiplier
/// (bridge_lambda of an m-vector when the rounds came from the original game).
ExtractionCertificate extraction_certificate(const TabularMDP& mdp, const ConstraintSpec& spec,
                                             const std::vector<TabularPolicy>& iterates,
                                             double lambda_bar, std::size_t n, std::uint64_t seed,
                                             std::size_t jobs = 1);
ExtractionCertificate extraction_certificate(const TabularMDP& mdp, const ReformTrace& trace,
                                             std::size_t n, std::uint64_t seed, std::size_t jobs = 1);

void write_certificate(std::ostream& out, const ExtractionCertificate& cert);
/// t, V-hat_0, g-hat, L-hat, n
void write_estimates_csv(std::ostream& out, const std::vector<IterateEstimate>& table);

// *************************************************************************************
// **** Error cancellation
// *************************************************************************************

struct CancellationReport {
    double mixture_signed_violation = 0.0; ///< g of the mixture's expected values
    std::vector<double> member_positive_part; ///< [g]_+ of each support policy
    std::vector<std::vector<double>> member_values;
};

CancellationReport cancellation_report(const TabularMDP& mdp, const ConstraintSpec& spec,
                                       const std::vector<TabularPolicy>& members,
                                       const std::vector<double>& weights);

/// Three-region line: start (centre, no signal), left (signal -1) and right
/// (signal +1). Actions 0/1/2 move to centre/left/right. r_0 = 1 on the sides;
/// constraints E[sum c] <= 0 and E[-sum c] <= 0.
TabularMDP safe_left_right_mdp(std::size_t horizon);
ConstraintSpec safe_left_right_constraints(double cap);

} // namespace morl
