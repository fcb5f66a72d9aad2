#include "morl/game_loop.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>

namespace morl {

double lagrangian(std::span<const double> values, std::span<const double> lambda,
                  const ConstraintSpec& spec) {
    const auto g = compute_slacks(values, spec);
    if (lambda.size() != g.size()) throw ValidationError("lagrangian: dimension mismatch");
    double L = values[0];
    for (std::size_t i = 0; i < g.size(); ++i) L += lambda[i] * g[i];
    return L;
}

double lagrangian(const ValueVector& values, const LagrangeWeights& lambda, const ConstraintSpec& spec) {
    return lagrangian(std::span<const double>(values.v), std::span<const double>(lambda.lambda), spec);
}

double GameSettings::step_size(const ConstraintSpec& spec) const {
    if (eta > 0.0) return eta;
    return theory_step_size(lambda_diameter(spec), grad_bound, rounds);
}

LagrangeWeights GameTrace::lambda_bar() const {
    if (rounds.empty()) throw ContractError("lambda_bar: empty trace");
    return rounds.back().lambda_bar;
}

PolicyMixture GameTrace::mixture(std::size_t upto) const {
    if (upto == 0) upto = policies.size();
    if (upto > policies.size()) throw ContractError("mixture: round not completed");
    return PolicyMixture::uniform(std::vector<PolicyPtr>(policies.begin(), policies.begin() + upto));
}

std::size_t GameTrace::feasible_count(std::size_t upto) const {
    upto = std::min(upto, rounds.size());
    return static_cast<std::size_t>(
        std::count_if(rounds.begin(), rounds.begin() + upto, [](const RoundRecord& r) { return r.feasible; }));
}

std::vector<RoundLoss> GameTrace::losses() const {
    std::vector<RoundLoss> out;
    out.reserve(rounds.size());
    for (const auto& r : rounds) out.push_back({r.values[0], r.slack, r.lambda.lambda});
    return out;
}

std::vector<double> GameTrace::average_values(std::size_t upto) const {
    if (upto == 0) upto = rounds.size();
    if (upto == 0 || upto > rounds.size()) throw ContractError("average_values: bad round count");
    std::vector<double> avg(rounds.front().values.size(), 0.0);
    for (std::size_t t = 0; t < upto; ++t)
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += rounds[t].values[i];
    for (auto& x : avg) x /= static_cast<double>(upto);
    return avg;
}

GameTrace run_repeated_game(const GameSettings& settings, const ConstraintSpec& spec,
                            BestResponder& learner, RoundEvaluator& evaluator,
                            const RoundObserver& observer) {
    spec.validate();
    if (settings.rounds == 0) throw ConfigError("game: rounds must be at least 1");
    const std::size_t m = spec.size();

    ConstraintSpec training = spec;
    if (!settings.tighten.empty()) {
        if (settings.tighten.size() != m) throw ConfigError("game: one tightening per constraint");
        for (std::size_t i = 0; i < m; ++i) training.alpha[i] -= settings.tighten[i];
    }
    const double eta = settings.step_size(spec);

    LagrangeWeights lambda = settings.lambda0.empty()
                                 ? LagrangeWeights{std::vector<double>(m, 0.0)}
                                 : project_lambda(settings.lambda0, spec);
    if (lambda.size() != m) throw ConfigError("game: lambda0 has the wrong dimension");
    std::vector<double> lambda_sum(m, 0.0);

    GameTrace trace;
    trace.spec = spec;
    for (std::size_t t = 1; t <= settings.rounds; ++t) {
        PolicyPtr policy;
        std::string id;
        try {
            std::tie(policy, id) = learner.respond(lambda, training, t);
        } catch (const TrainingFailure& e) {
            trace.failure = GameFailure{t, e.episode(), e.what()};
            break;
        }

        RoundRecord rec;
        rec.round = t;
        rec.policy_id = std::move(id);
        rec.lambda = lambda;
        rec.values = evaluator.evaluate(*policy, t);
        rec.slack = compute_slacks(rec.values, spec);
        rec.feasible = std::all_of(rec.slack.begin(), rec.slack.end(), [](double g) { return g >= 0.0; });
        rec.lagrangian = lagrangian(rec.values, lambda, spec);

        for (std::size_t i = 0; i < m; ++i) lambda_sum[i] += lambda.lambda[i];
        rec.lambda_bar.lambda.resize(m);
        for (std::size_t i = 0; i < m; ++i) rec.lambda_bar.lambda[i] = lambda_sum[i] / static_cast<double>(t);

        const auto g_train = compute_slacks(rec.values, training);
        lambda = ogd_step(lambda, g_train, eta, spec);
        rec.lambda_next = lambda;

        trace.policies.push_back(std::move(policy));
        trace.rounds.push_back(std::move(rec));
        if (observer) observer(trace.rounds.back());
    }
    return trace;
}

ValueVector evaluate_mixture(const GameTrace& trace, std::size_t upto, const EpisodicMDP& env,
                             std::size_t episodes, std::uint64_t seed, std::size_t jobs) {
    if (upto == 0 || upto > trace.policies.size())
        throw ContractError("evaluate_mixture: missing round policy");
    return estimate_values(env, trace.mixture(upto), episodes, seed, jobs);
}

// *************************************************************************************

DqnResponder::DqnResponder(const EpisodicMDP& env, LearnerConfig cfg, std::uint64_t seed,
                           std::string checkpoint_dir, std::uint64_t config_hash)
    : env_(env.clone()), learner_(env.observation_dim(), env.action_count(), cfg), seed_(seed),
      checkpoint_dir_(std::move(checkpoint_dir)), config_hash_(config_hash) {
    if (!checkpoint_dir_.empty()) std::filesystem::create_directories(checkpoint_dir_);
}

std::pair<PolicyPtr, std::string> DqnResponder::respond(const LagrangeWeights& lambda,
                                                        const ConstraintSpec& training_spec,
                                                        std::size_t round) {
    auto spec = ScalarizedSpec::from(training_spec, lambda, env_->horizon());
    auto result = learner_.train(*env_, spec, derive_seed(seed_, 1, round));
    curves_.push_back(std::move(result.curve));
    char id[32];
    std::snprintf(id, sizeof id, "round_%03zu", round);
    if (!checkpoint_dir_.empty())
        save_checkpoint(checkpoint_dir_ + "/" + id + ".qnet", result.policy->network(), config_hash_);
    return {result.policy, id};
}

MonteCarloEvaluator::MonteCarloEvaluator(const EpisodicMDP& env, std::size_t episodes,
                                         std::uint64_t seed, std::size_t jobs)
    : env_(env.clone()), episodes_(episodes), seed_(seed), jobs_(jobs) {
    if (episodes_ == 0) throw ConfigError("evaluator: n_eval must be at least 1");
}

ValueVector MonteCarloEvaluator::evaluate(const Policy& policy, std::size_t round) {
    // non-owning handle; the policy outlives the call
    PolicyPtr handle(&policy, [](const Policy*) {});
    return estimate_values(*env_, PolicyMixture(handle), episodes_, derive_seed(seed_, 2, round), jobs_);
}

std::pair<PolicyPtr, std::string> ExactBestResponder::respond(const LagrangeWeights& lambda,
                                                              const ConstraintSpec& training_spec,
                                                              std::size_t round) {
    auto spec = ScalarizedSpec::from(training_spec, lambda, mdp_.horizon);
    auto plan = backward_induction(mdp_, scalarized_table(mdp_, spec));
    return {std::make_shared<TabularPolicy>(std::move(plan.policy)), "round_" + std::to_string(round)};
}

ValueVector ExactEvaluator::evaluate(const Policy& policy, std::size_t) {
    const auto* tp = dynamic_cast<const TabularPolicy*>(&policy);
    if (!tp) throw UnsupportedError("ExactEvaluator: requires a tabular policy");
    return ValueVector::exact(exact_values(mdp_, *tp));
}

double best_response_value(const TabularMDP& mdp, const ConstraintSpec& spec,
                           const LagrangeWeights& lambda) {
    auto s = ScalarizedSpec::from(spec, lambda, mdp.horizon);
    return backward_induction(mdp, scalarized_table(mdp, s)).value;
}

MinimaxGaps minimax_gaps(const TabularMDP& mdp, const GameTrace& trace) {
    const auto& spec = trace.spec;
    const auto lbar = trace.lambda_bar();
    const auto vbar = trace.average_values();
    MinimaxGaps gaps;
    gaps.value = lagrangian(vbar, lbar.lambda, spec);
    gaps.upper = best_response_value(mdp, spec, lbar) - gaps.value;
    // L(D-bar, .) is affine, so its minimum over Lambda sits at 0 or C e_i
    const auto g = compute_slacks(vbar, spec);
    const double worst = g.empty() ? 0.0 : *std::min_element(g.begin(), g.end());
    gaps.lower = gaps.value - (vbar[0] + std::min(0.0, spec.cap * worst));
    return gaps;
}

void write_rounds_csv_header(std::ostream& out, std::size_t m) {
    out << "round,v_0";
    for (std::size_t i = 1; i <= m; ++i) out << ",g_" << i;
    for (std::size_t i = 1; i <= m; ++i) out << ",lambda_" << i;
    for (std::size_t i = 1; i <= m; ++i) out << ",lambda_bar_" << i;
    out << ",L,feasible\n";
}

void write_rounds_csv_row(std::ostream& out, const RoundRecord& rec) {
    const auto old = out.precision(12);
    out << rec.round << ',' << rec.values[0];
    for (double g : rec.slack) out << ',' << g;
    for (double l : rec.lambda.lambda) out << ',' << l;
    for (double l : rec.lambda_bar.lambda) out << ',' << l;
    out << ',' << rec.lagrangian << ',' << (rec.feasible ? 1 : 0) << '\n';
    out.precision(old);
}

void write_rounds_csv(std::ostream& out, const GameTrace& trace) {
    write_rounds_csv_header(out, trace.spec.size());
    for (const auto& r : trace.rounds) write_rounds_csv_row(out, r);
}

} // namespace morl
