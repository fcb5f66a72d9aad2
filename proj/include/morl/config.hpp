#pragma once

#include "morl/env_sim.hpp"
#include "morl/game_loop.hpp"
#include "morl/learner.hpp"
#include "morl/regulator.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace morl {

/**
 * Everything a subcommand needs, loaded from one INI file with sections
 * [run] [sim] [constraints] [learner] [game] [baseline] [bench] [extract]
 * [testbed]. Unknown keys are rejected.
 */
struct ExperimentConfig {
    // [run]
    std::uint64_t seed = 1;
    std::size_t seeds = 1; ///< batch size for multi-seed subcommands (seed, seed+1, ...)
    std::size_t jobs = 1;
    std::string output = "runs";
    std::string preset = "desk";

    sim::SimConfig sim = sim::desk_config();
    // [constraints]
    double large_fraction = 0.40;
    double sd_ratio = 0.5;
    double human_cap = 3.0;
    double robot_cap = 12.0;
    double cap = 1000.0;

    LearnerConfig learner;

    // [game]
    GameSettings game;
    std::size_t game_episodes = 15; ///< DQN episodes per round
    std::size_t n_eval = 10;        ///< evaluation episodes per round policy

    // [baseline]
    std::size_t baseline_episodes = 100;

    // [bench]
    std::size_t confirm_episodes = 30;
    std::size_t report_episodes = 10;

    // [extract]
    double epsilon = 0.5;
    double delta = 0.05;
    std::size_t fw_iterations = 10000;
    double fw_eps = 1e-3;
    /// Cap on episodes per iterate when the Hoeffding count is impractical
    /// (warehouse runs, whose signals are not in [0, 1]).
    std::size_t max_samples = 200;

    // [testbed]
    std::string fixtures = "tests/fixtures";
    std::size_t repetitions = 200;
    std::string testbed_game = "toy_7"; ///< fixture for the concentration harness
    std::size_t testbed_rounds = 5;     ///< iterates drawn from a reformulated game of this length
    double testbed_lambda_bar = 1.0;

    ConstraintSpec constraints() const;
    /// Learner config used inside the game (episode count from [game]).
    LearnerConfig game_learner(std::uint64_t seed) const;
    LearnerConfig baseline_learner(std::uint64_t seed) const;

    /// Canonical INI text; loading it reproduces this config.
    std::string serialize() const;
    /// FNV-1a 64 of serialize().
    std::uint64_t hash() const;
    void validate() const;
};

ExperimentConfig desk_preset();
/// 1440 steps per day, 10 days per episode, C = 20000.
ExperimentConfig full_scale_preset();

/// Applies the file on top of `base`. Throws ConfigError on unknown keys or
/// malformed values.
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = desk_preset());
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = desk_preset());

/// "section.key=value"
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t h);

} // namespace morl
