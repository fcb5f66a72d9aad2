#include "morl/artifacts.hpp"
#include "morl/config.hpp"
#include "morl/testbed.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace morl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("morl_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("config serialization round trips") {
    auto cfg = desk_preset();
    cfg.seed = 42;
    cfg.human_cap = 2.5;
    cfg.game.rounds = 7;
    cfg.learner.learning_rate = 1e-3;
    const auto text = cfg.serialize();
    const auto back = parse_config(text);
    CHECK(back.serialize() == text);
    CHECK(back.hash() == cfg.hash());
    CHECK(back.seed == 42);
    CHECK(back.game.rounds == 7);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("[game]\nnot_a_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[nowhere]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[game]\nrounds = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[game]\nrounds = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[extract]\nmax_samples = 0\n"), ConfigError);
}

TEST_CASE("overrides") {
    auto cfg = desk_preset();
    apply_override(cfg, "game.rounds=3");
    CHECK(cfg.game.rounds == 3);
    CHECK_THROWS_AS(apply_override(cfg, "game.rounds"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "game.nope=1"), ConfigError);
}

TEST_CASE("presets") {
    CHECK(desk_preset().sim.horizon() == 288);
    const auto p = full_scale_preset();
    CHECK(p.sim.steps_per_day == 1440);
    CHECK(p.sim.n_days == 10);
    CHECK(p.cap == 20000.0);
}

TEST_CASE("fnv1a") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("manifest verification detects tampering") {
    const auto dir = scratch("manifest");
    RunManifest m(dir.string(), "testbed", desk_preset().serialize(), {1});
    {
        std::ofstream(m.path("a.csv")) << "x\n1\n";
        std::ofstream(m.path("sub/b.txt")) << "hello\n";
    }
    m.add("a.csv");
    m.add_tree("sub");
    m.finish();
    CHECK(verify_run(dir.string()).ok);

    std::ofstream(dir / "a.csv", std::ios::app) << "2\n";
    auto rep = verify_run(dir.string());
    CHECK_FALSE(rep.ok);

    std::ofstream(dir / "a.csv") << "x\n1\n";
    CHECK(verify_run(dir.string()).ok);
    std::ofstream(dir / "stray.txt") << "?";
    CHECK_FALSE(verify_run(dir.string()).ok);
    fs::remove_all(dir);
}

TEST_CASE("game files round trip") {
    const auto g = load_tabular_game("tests/fixtures/fw_1.game");
    CHECK(g.name == "fw_1");
    REQUIRE(g.lambda);
    CHECK(g.spec.size() == 1);
    std::stringstream ss;
    write_tabular_game(ss, g);
    const auto back = read_tabular_game(ss, "copy");
    CHECK(back.mdp.transitions == g.mdp.transitions);
    CHECK(back.mdp.rewards == g.mdp.rewards);
    CHECK(back.spec.alpha == g.spec.alpha);
    CHECK(back.spec.cap == g.spec.cap);
    CHECK(*back.lambda == *g.lambda);

    const auto slr = load_tabular_game("tests/fixtures/safe_left_right.game");
    REQUIRE(slr.min_violation);
    CHECK(*slr.min_violation > 0.0);
    CHECK_THROWS_AS(load_tabular_game("tests/fixtures/missing.game"), ConfigError);

    std::stringstream bad;
    write_tabular_mdp(bad, g.mdp);
    bad << "constraints 1 cap 1\nalpha 0.5\nsign 1\nbogus 3\n";
    CHECK_THROWS_AS(read_tabular_game(bad), ConfigError);
}

TEST_CASE("cancellation and Clopper-Pearson") {
    const auto r = left_right_cancellation(4);
    CHECK(std::abs(r.mixture_signed_violation) <= 1e-9);
    for (double g : r.member_positive_part) CHECK(g >= 1.0);
    // k = n: lower bound is (1 - conf)^(1/n)
    CHECK(clopper_pearson_lower(200, 200) == doctest::Approx(std::pow(0.05, 1.0 / 200.0)));
    CHECK(clopper_pearson_lower(0, 10) == 0.0);
}
