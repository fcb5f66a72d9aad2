#include "morl/learner.hpp"
#include "morl/qnetwork.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace morl;

TEST_CASE("scalarize") {
    ScalarizedSpec spec{{2.0}, {10.0}, {1.0}, 10.0};
    const std::vector<double> r{1.0, 0.5};
    CHECK(scalarize(r, spec) == doctest::Approx(2.0).epsilon(1e-15));

    ScalarizedSpec zero{{0.0, 0.0}, {3.0, 4.0}, {1.0, -1.0}, 7.0};
    const std::vector<double> r2{0.7, 9.0, -3.0};
    CHECK(scalarize(r2, zero) == 0.7);

    // r_i = sign_i alpha_i / H makes every slack term vanish
    ScalarizedSpec any{{5.0, 0.3}, {3.0, -4.0}, {1.0, -1.0}, 8.0};
    const std::vector<double> fixed{0.25, 3.0 / 8.0, 4.0 / 8.0};
    CHECK(scalarize(fixed, any) == doctest::Approx(0.25).epsilon(1e-15));

    ScalarizedSpec neg{{-1.0}, {1.0}, {1.0}, 1.0};
    CHECK_THROWS_AS(neg.validate(), ValidationError);
}

TEST_CASE("MLP gradient matches finite differences") {
    Rng rng(3);
    Mlp net({4, 6, 5, 3}, rng);
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 7);
    std::vector<int> actions{0, 1, 2, 0, 1, 2, 1};
    Eigen::VectorXd y = Eigen::VectorXd::Random(7) * 3.0;
    const auto g = net.gradient(X, actions, y, 1.0);
    auto theta = net.parameters();
    REQUIRE(g.size() == theta.size());
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        auto tp = theta, tm = theta;
        tp[k] += h;
        tm[k] -= h;
        net.set_parameters(tp);
        const double fp = net.loss(X, actions, y, 1.0);
        net.set_parameters(tm);
        const double fm = net.loss(X, actions, y, 1.0);
        worst = std::max(worst, std::abs((fp - fm) / (2 * h) - g[k]));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("checkpoint round trip keeps weights and hash") {
    Rng rng(1);
    Mlp net({3, 8, 2}, rng);
    const auto path = (std::filesystem::temp_directory_path() / "morl_ckpt_test.qnet").string();
    save_checkpoint(path, net, 0xABCDEFull);
    std::uint64_t hash = 0;
    const auto back = load_checkpoint(path, &hash);
    CHECK(hash == 0xABCDEFull);
    CHECK(back.same_weights(net));
    std::filesystem::remove(path);
    std::stringstream junk("not a checkpoint");
    Mlp other;
    CHECK_THROWS(other.load(junk));
}

TEST_CASE("best response gap") {
    const auto mdp = random_tabular_mdp(3, 2, 3, 2, 4);
    ScalarizedSpec spec{{0.5}, {1.0}, {1.0}, 3.0};
    const auto opt = backward_induction(mdp, scalarized_table(mdp, spec));
    CHECK(std::abs(best_response_gap(mdp, opt.policy, spec)) < 1e-9);
    const auto uni = TabularPolicy::uniform(3, 2, 3);
    const auto table = scalarized_table(mdp, spec);
    const double uni_value = value_from_occupancy(occupancy_of_policy(mdp, uni), table);
    CHECK(best_response_gap(mdp, uni, spec) == doctest::Approx(opt.value - uni_value).epsilon(1e-12));
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::vector<std::size_t> choice(9);
        for (std::size_t k = 0; k < 9; ++k) choice[k] = (derive_seed(s, k) >> 7) % 2;
        CHECK(best_response_gap(mdp, TabularPolicy::deterministic(3, 2, 3, choice), spec) >= -1e-12);
    }
}

TEST_CASE("DQN picks the better arm of a two-state bandit") {
    TabularMDP m;
    m.n_states = 2;
    m.n_actions = 2;
    m.horizon = 1;
    m.transitions = {1, 0, 1, 0, 0, 1, 0, 1};
    m.rewards = {RewardTable{1.0, 0.0, 0.0, 1.0}};
    m.initial = {0.5, 0.5};
    TabularEnv env(m);
    LearnerConfig cfg;
    cfg.episodes_per_round = 600;
    cfg.warmup_steps = 32;
    cfg.target_sync = 50;
    cfg.learning_rate = 3e-3;
    cfg.reward_scale = 1.0;
    cfg.hidden = {16};
    const ConstraintSpec none{{}, {}, 1.0, {}};
    const auto res = train_best_response(env, ScalarizedSpec::unconstrained(none, 1), cfg);
    const auto pi = tabulate_policy(*res.policy, env);
    // exhaustive argmax per state
    CHECK(pi.prob(0, 0, 0) == 1.0);
    CHECK(pi.prob(0, 1, 1) == 1.0);
    CHECK(res.curve.size() == 600);
}

TEST_CASE("DQN gets within 5% of the optimum on a 4-state MDP") {
    const auto mdp = random_tabular_mdp(4, 2, 4, 1, 12);
    TabularEnv env(mdp);
    LearnerConfig cfg;
    cfg.episodes_per_round = 1500;
    cfg.warmup_steps = 200;
    cfg.target_sync = 200;
    cfg.learning_rate = 1e-3;
    cfg.reward_scale = 1.0;
    cfg.gamma = 1.0;
    cfg.hidden = {32, 32};
    const ConstraintSpec none{{}, {}, 1.0, {}};
    const auto spec = ScalarizedSpec::unconstrained(none, mdp.horizon);
    const auto res = train_best_response(env, spec, cfg);
    const double opt = backward_induction(mdp, mdp.rewards[0]).value;
    const double got = exact_values(mdp, tabulate_policy(*res.policy, env))[0];
    CHECK(got >= 0.95 * opt);
}

TEST_CASE("training is deterministic per seed") {
    TabularEnv env(random_tabular_mdp(3, 2, 4, 2, 3));
    LearnerConfig cfg;
    cfg.episodes_per_round = 80;
    cfg.warmup_steps = 50;
    const ConstraintSpec spec = ConstraintSpec::upper_bounds({1.0}, 5.0);
    const auto s = ScalarizedSpec::from(spec, LagrangeWeights{{0.7}}, 4);
    const auto a = train_best_response(env, s, cfg), b = train_best_response(env, s, cfg);
    CHECK(a.policy->network().same_weights(b.policy->network()));
    for (std::size_t k = 0; k < a.curve.size(); ++k) CHECK(a.curve[k].scalarized_return == b.curve[k].scalarized_return);
}

TEST_CASE("learner config validation") {
    LearnerConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS(cfg.validate());
    cfg = LearnerConfig{};
    cfg.learning_rate = -1.0;
    CHECK_THROWS(cfg.validate());
}
