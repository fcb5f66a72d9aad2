#include "morl/config.hpp"

#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace morl {

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <class T> T parse_scalar(const std::string& key, const std::string& text) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (text == "true" || text == "1" || text == "yes") return true;
            if (text == "false" || text == "0" || text == "no") return false;
            throw boost::bad_lexical_cast();
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!text.empty() && text.front() == '-') throw boost::bad_lexical_cast();
            return boost::lexical_cast<T>(text);
        } else {
            return boost::lexical_cast<T>(text);
        }
    } catch (const boost::bad_lexical_cast&) {
        throw ConfigError("config: bad value for " + key + ": '" + text + "'");
    }
}

template <class T> std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(parse_scalar<T>(key, item.substr(b, e - b + 1)));
    }
    return out;
}

template <class T> std::string to_text(const T& v) {
    if constexpr (std::is_same_v<T, bool>)
        return v ? "true" : "false";
    else if constexpr (std::is_same_v<T, double>)
        return fmt_double(v);
    else if constexpr (std::is_same_v<T, std::string>)
        return v;
    else
        return std::to_string(v);
}

template <class T> std::string list_text(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + to_text(v[i]);
    return s;
}

struct Binding {
    std::string section;
    std::string key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class T> Binding field_binding(std::string section, std::string key, T ExperimentConfig::*field) {
    const std::string full = section + "." + key;
    return {section, key, [field](const ExperimentConfig& c) { return to_text(c.*field); },
            [field, full](ExperimentConfig& c, const std::string& v) {
                if constexpr (std::is_same_v<T, std::string>)
                    c.*field = v;
                else
                    c.*field = parse_scalar<T>(full, v);
            }};
}

template <class S, class T>
Binding nested_binding(std::string section, std::string key, S ExperimentConfig::*outer, T S::*field) {
    const std::string full = section + "." + key;
    return {section, key, [outer, field](const ExperimentConfig& c) { return to_text(c.*outer.*field); },
            [outer, field, full](ExperimentConfig& c, const std::string& v) {
                c.*outer.*field = parse_scalar<T>(full, v);
            }};
}

template <class S, class T>
Binding list_binding(std::string section, std::string key, S ExperimentConfig::*outer, std::vector<T> S::*field) {
    const std::string full = section + "." + key;
    return {section, key, [outer, field](const ExperimentConfig& c) { return list_text(c.*outer.*field); },
            [outer, field, full](ExperimentConfig& c, const std::string& v) {
                c.*outer.*field = parse_list<T>(full, v);
            }};
}

const std::vector<Binding>& bindings() {
    using E = ExperimentConfig;
    using S = sim::SimConfig;
    using L = LearnerConfig;
    using G = GameSettings;
    static const std::vector<Binding> table = {
        field_binding("run", "seed", &E::seed),
        field_binding("run", "seeds", &E::seeds),
        field_binding("run", "jobs", &E::jobs),
        field_binding("run", "output", &E::output),
        field_binding("run", "preset", &E::preset),

        nested_binding("sim", "floor_max", &E::sim, &S::floor_max),
        nested_binding("sim", "steps_per_day", &E::sim, &S::steps_per_day),
        nested_binding("sim", "n_days", &E::sim, &S::n_days),
        nested_binding("sim", "etph_window_hours", &E::sim, &S::etph_window_hours),
        nested_binding("sim", "human_rate", &E::sim, &S::human_rate),
        nested_binding("sim", "robot_rate", &E::sim, &S::robot_rate),
        nested_binding("sim", "human_servers", &E::sim, &S::human_servers),
        nested_binding("sim", "robot_servers", &E::sim, &S::robot_servers),
        nested_binding("sim", "stow_rate", &E::sim, &S::stow_rate),
        nested_binding("sim", "pick_fraction", &E::sim, &S::pick_fraction),
        nested_binding("sim", "init_large_fraction", &E::sim, &S::init_large_fraction),
        nested_binding("sim", "init_fill", &E::sim, &S::init_fill),
        nested_binding("sim", "item_min", &E::sim, &S::item_min),
        nested_binding("sim", "item_max", &E::sim, &S::item_max),
        nested_binding("sim", "pick_demand", &E::sim, &S::pick_demand),
        nested_binding("sim", "large_item_gcu", &E::sim, &S::large_item_gcu),
        nested_binding("sim", "small_item_gcu", &E::sim, &S::small_item_gcu),
        nested_binding("sim", "dest_eject_gcu", &E::sim, &S::dest_eject_gcu),
        nested_binding("sim", "queue_scale", &E::sim, &S::queue_scale),
        nested_binding("sim", "collapse_actions", &E::sim, &S::collapse_actions),

        field_binding("constraints", "large_fraction", &E::large_fraction),
        field_binding("constraints", "sd_ratio", &E::sd_ratio),
        field_binding("constraints", "human_cap", &E::human_cap),
        field_binding("constraints", "robot_cap", &E::robot_cap),
        field_binding("constraints", "cap", &E::cap),

        nested_binding("learner", "episodes", &E::learner, &L::episodes_per_round),
        nested_binding("learner", "replay_capacity", &E::learner, &L::replay_capacity),
        nested_binding("learner", "batch_size", &E::learner, &L::batch_size),
        nested_binding("learner", "target_sync", &E::learner, &L::target_sync),
        nested_binding("learner", "train_every", &E::learner, &L::train_every),
        nested_binding("learner", "warmup_steps", &E::learner, &L::warmup_steps),
        nested_binding("learner", "learning_rate", &E::learner, &L::learning_rate),
        nested_binding("learner", "eps_start", &E::learner, &L::eps_start),
        nested_binding("learner", "eps_warm_start", &E::learner, &L::eps_warm_start),
        nested_binding("learner", "eps_end", &E::learner, &L::eps_end),
        nested_binding("learner", "eps_decay_fraction", &E::learner, &L::eps_decay_fraction),
        list_binding("learner", "hidden", &E::learner, &L::hidden),
        nested_binding("learner", "gamma", &E::learner, &L::gamma),
        nested_binding("learner", "reward_scale", &E::learner, &L::reward_scale),
        nested_binding("learner", "huber_delta", &E::learner, &L::huber_delta),
        nested_binding("learner", "warm_start", &E::learner, &L::warm_start),

        nested_binding("game", "rounds", &E::game, &G::rounds),
        nested_binding("game", "eta", &E::game, &G::eta),
        nested_binding("game", "grad_bound", &E::game, &G::grad_bound),
        list_binding("game", "lambda0", &E::game, &G::lambda0),
        list_binding("game", "tighten", &E::game, &G::tighten),
        field_binding("game", "episodes_per_round", &E::game_episodes),
        field_binding("game", "n_eval", &E::n_eval),

        field_binding("baseline", "episodes", &E::baseline_episodes),

        field_binding("bench", "confirm_episodes", &E::confirm_episodes),
        field_binding("bench", "report_episodes", &E::report_episodes),

        field_binding("extract", "epsilon", &E::epsilon),
        field_binding("extract", "delta", &E::delta),
        field_binding("extract", "fw_iterations", &E::fw_iterations),
        field_binding("extract", "fw_eps", &E::fw_eps),
        field_binding("extract", "max_samples", &E::max_samples),

        field_binding("testbed", "fixtures", &E::fixtures),
        field_binding("testbed", "repetitions", &E::repetitions),
        field_binding("testbed", "game", &E::testbed_game),
        field_binding("testbed", "rounds", &E::testbed_rounds),
        field_binding("testbed", "lambda_bar", &E::testbed_lambda_bar),
    };
    return table;
}

const Binding& find_binding(const std::string& section, const std::string& key) {
    for (const auto& b : bindings())
        if (b.section == section && b.key == key) return b;
    throw ConfigError("config: unknown key " + section + "." + key);
}

} // namespace

ConstraintSpec ExperimentConfig::constraints() const {
    return sim::floor_constraints(large_fraction, sd_ratio, human_cap, robot_cap, cap);
}

LearnerConfig ExperimentConfig::game_learner(std::uint64_t s) const {
    LearnerConfig c = learner;
    c.episodes_per_round = game_episodes;
    c.seed = s;
    return c;
}

LearnerConfig ExperimentConfig::baseline_learner(std::uint64_t s) const {
    LearnerConfig c = learner;
    c.episodes_per_round = baseline_episodes;
    c.seed = s;
    return c;
}

std::string ExperimentConfig::serialize() const {
    std::string out, section;
    for (const auto& b : bindings()) {
        if (b.section != section) {
            out += (section.empty() ? "[" : "\n[") + b.section + "]\n";
            section = b.section;
        }
        out += b.key + " = " + b.get(*this) + "\n";
    }
    return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(serialize()); }

void ExperimentConfig::validate() const {
    sim.validate();
    learner.validate();
    constraints().validate();
    if (seeds == 0) throw ConfigError("config: run.seeds must be at least 1");
    if (jobs == 0) throw ConfigError("config: run.jobs must be at least 1");
    if (game.rounds == 0) throw ConfigError("config: game.rounds must be at least 1");
    if (game_episodes == 0 || n_eval == 0) throw ConfigError("config: game episode counts must be positive");
    if (!game.tighten.empty() && game.tighten.size() != sim::kConstraintCount)
        throw ConfigError("config: game.tighten needs one entry per constraint");
    if (!game.lambda0.empty() && game.lambda0.size() != sim::kConstraintCount)
        throw ConfigError("config: game.lambda0 needs one entry per constraint");
    if (baseline_episodes == 0 || report_episodes == 0) throw ConfigError("config: episode counts must be positive");
    if (!(epsilon > 0.0)) throw ConfigError("config: extract.epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("config: extract.delta must lie in (0, 1)");
    if (max_samples == 0) throw ConfigError("config: extract.max_samples must be positive");
    if (fw_iterations == 0 || !(fw_eps > 0.0)) throw ConfigError("config: bad Frank-Wolfe settings");
    if (repetitions == 0) throw ConfigError("config: testbed.repetitions must be at least 1");
    if (testbed_rounds == 0) throw ConfigError("config: testbed.rounds must be at least 1");
    if (!(testbed_lambda_bar >= 0.0)) throw ConfigError("config: testbed.lambda_bar must be non-negative");
}

ExperimentConfig desk_preset() {
    ExperimentConfig c;
    c.game.rounds = 20;
    c.game.eta = 5.0;
    c.game.tighten = {0.0, 0.0, 1.0, 0.0};
    return c;
}

ExperimentConfig full_scale_preset() {
    ExperimentConfig c = desk_preset();
    c.preset = "full";
    c.sim = sim::full_scale_config();
    c.cap = 20000.0;
    return c;
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config: key outside a section: " + section);
        for (const auto& [key, value] : body) find_binding(section, key).set(base, value.data());
    }
    base.validate();
    return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ConfigError("config: override must look like section.key=value: " + assignment);
    find_binding(assignment.substr(0, dot), assignment.substr(dot + 1, eq - dot - 1))
        .set(cfg, assignment.substr(eq + 1));
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace morl
