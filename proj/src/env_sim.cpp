#include "morl/env_sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace morl::sim {

Action Action::from_index(std::size_t index, bool collapsed) {
    Action a;
    if (collapsed) {
        if (index >= kCollapsedActionCount) throw ValidationError("action index out of range");
        if (index == 0) return a;
        const std::size_t k = index - 1;
        a.ignore = false;
        a.role = (k & 2) ? Role::Destination : Role::Source;
        a.station = (k & 1) ? Station::Robot : Station::Human;
        return a;
    }
    if (index >= kActionCount) throw ValidationError("action index out of range");
    a.ignore = index >= 4;
    a.role = (index & 2) ? Role::Destination : Role::Source;
    a.station = (index & 1) ? Station::Robot : Station::Human;
    return a;
}

std::size_t Action::index(bool collapsed) const {
    const std::size_t body = (role == Role::Destination ? 2 : 0) + (station == Station::Robot ? 1 : 0);
    if (collapsed) return ignore ? 0 : 1 + body;
    return (ignore ? 4 : 0) + body;
}

std::size_t SimConfig::window_steps() const {
    const double w = std::llround(etph_window_hours / step_hours());
    return static_cast<std::size_t>(std::max(1.0, w));
}

void SimConfig::validate() const {
    if (floor_max == 0) throw ConfigError("sim: floor_max must be positive");
    if (steps_per_day == 0 || n_days == 0) throw ConfigError("sim: horizon must be positive");
    if (!(etph_window_hours > 0.0)) throw ConfigError("sim: etph_window_hours must be positive");
    for (double f : {pick_fraction, init_large_fraction, init_fill, pick_demand})
        if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("sim: fractions must lie in [0, 1]");
    for (double r : {human_rate, robot_rate, stow_rate})
        if (!(r >= 0.0)) throw ConfigError("sim: rates must be non-negative");
    if (human_servers < 1 || robot_servers < 1) throw ConfigError("sim: stations need at least one server");
    if (item_min < 1 || item_max < item_min) throw ConfigError("sim: need 1 <= item_min <= item_max");
    if (!(large_item_gcu > 0.0) || !(small_item_gcu > 0.0))
        throw ConfigError("sim: per-item gcu must be positive");
    if (!(dest_eject_gcu > 0.0 && dest_eject_gcu <= 1.0))
        throw ConfigError("sim: dest_eject_gcu must lie in (0, 1]");
    if (!(queue_scale > 0.0)) throw ConfigError("sim: queue_scale must be positive");
}

SimConfig desk_config() {
    SimConfig c;
    c.floor_max = 200;
    c.steps_per_day = 288;
    c.n_days = 1;
    c.stow_rate = 40.0;
    return c;
}

SimConfig full_scale_config() {
    SimConfig c;
    c.floor_max = 1000;
    c.steps_per_day = 1440;
    c.n_days = 10;
    return c;
}

QueueLengths FloorState::queues() const {
    const auto& h = station(Station::Human);
    const auto& r = station(Station::Robot);
    return {static_cast<int>(h.sources.size()), static_cast<int>(h.destinations.size()),
            static_cast<int>(r.sources.size()), static_cast<int>(r.destinations.size())};
}

std::array<double, kConstraintCount> kpi_levels(const FloorState& state, const SimConfig& cfg) {
    const auto q = state.queues();
    return {static_cast<double>(state.n_large) / static_cast<double>(cfg.floor_max),
            static_cast<double>(q.human_source + q.robot_source) /
                (1.0 + q.human_dest + q.robot_dest),
            static_cast<double>(q.human_source + q.human_dest),
            static_cast<double>(q.robot_source + q.robot_dest)};
}

ConstraintSpec floor_constraints(double large_fraction, double sd_ratio, double human_cap,
                                 double robot_cap, double cap_C) {
    ConstraintSpec spec;
    spec.alpha = {large_fraction, -sd_ratio, human_cap, robot_cap};
    spec.sign = {1.0, -1.0, 1.0, 1.0};
    spec.cap = cap_C;
    spec.labels = {"N_large", "S/D", "Manual Cap.", "Robot Cap."};
    spec.validate();
    return spec;
}

ConstraintSpec desk_constraints() { return floor_constraints(0.40, 0.5, 3.0, 12.0, 1000.0); }

WarehouseSim::WarehouseSim(SimConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

namespace {

double item_gcu(const SimConfig& cfg, Occupancy o) {
    return o == Occupancy::Large ? cfg.large_item_gcu : cfg.small_item_gcu;
}

int poisson(Rng& rng, double mean) {
    if (!(mean > 0.0)) return 0;
    return std::poisson_distribution<int>(mean)(rng);
}

int binomial(Rng& rng, int n, double p) {
    if (n <= 0 || !(p > 0.0)) return 0;
    if (p >= 1.0) return n;
    return std::binomial_distribution<int>(n, p)(rng);
}

} // namespace

ToteSlot WarehouseSim::new_tote(Rng& rng) const {
    ToteSlot s;
    s.occupancy = std::bernoulli_distribution(cfg_.init_large_fraction)(rng) ? Occupancy::Large
                                                                            : Occupancy::Small;
    s.n_item = std::uniform_int_distribution<int>(cfg_.item_min, cfg_.item_max)(rng);
    s.n_pick = binomial(rng, s.n_item, cfg_.pick_demand);
    s.gcu = std::min(1.0, s.n_item * item_gcu(cfg_, s.occupancy));
    return s;
}

FloorState WarehouseSim::reset(std::uint64_t seed) const {
    FloorState st;
    st.rng.seed(seed);
    st.slots.resize(cfg_.floor_max);
    std::bernoulli_distribution filled(cfg_.init_fill);
    for (auto& slot : st.slots)
        if (filled(st.rng)) slot = new_tote(st.rng);
    st.n_large = count_large(st);
    st.emptied_log.reserve(cfg_.horizon());
    return st;
}

void WarehouseSim::process_station(FloorState& state, Station which, StepInfo& info) const {
    auto& st = state.station(which);
    const double rate = which == Station::Human ? cfg_.human_rate : cfg_.robot_rate;
    const int servers = which == Station::Human ? cfg_.human_servers : cfg_.robot_servers;
    auto eject_full = [&] {
        while (!st.destinations.empty() && st.destinations.front().gcu >= cfg_.dest_eject_gcu) {
            info.items_ejected += st.destinations.front().n_item;
            ++info.ejected_destinations;
            st.destinations.pop_front();
        }
    };
    eject_full();
    // each busy server completes Poisson(rate * dt) totes; a server is busy when it has a source
    const int busy = std::min<int>(servers, static_cast<int>(st.sources.size()));
    const int opportunities = poisson(state.rng, busy * rate * cfg_.step_hours());
    for (int k = 0; k < opportunities; ++k) {
        if (st.sources.empty() || st.destinations.empty()) break;
        ToteSlot src = st.sources.front();
        st.sources.pop_front();
        if (which == Station::Robot) {
            const double lte = 1.0 / std::max(1, src.n_item);
            if (!std::bernoulli_distribution(lte)(state.rng)) {
                ++info.robot_failures;
                state.station(Station::Human).sources.push_back(src);
                continue;
            }
        }
        ToteSlot& dst = st.destinations.front();
        dst.n_item += src.n_item;
        dst.n_pick += src.n_pick;
        dst.gcu = std::min(1.0, dst.gcu + src.n_item * item_gcu(cfg_, dst.occupancy));
        ++info.emptied;
        eject_full();
    }
}

void WarehouseSim::service(FloorState& state, StepInfo& info) const {
    // robot first, so its failures can reach the human queue within the step
    process_station(state, Station::Robot, info);
    process_station(state, Station::Human, info);
}

RewardVector WarehouseSim::rewards(const FloorState& next, const ConstraintSpec& spec) const {
    if (spec.size() != kConstraintCount)
        throw ValidationError("warehouse rewards need exactly four constraints");
    const auto level = kpi_levels(next, cfg_);
    const double H = static_cast<double>(cfg_.horizon());
    RewardVector r{};
    r[0] = next.etph;
    for (std::size_t i = 0; i < kConstraintCount; ++i)
        r[i + 1] = (spec.alpha[i] - spec.sign[i] * level[i]) / H;
    return r;
}

StepOutcome WarehouseSim::step(FloorState& state, const Action& action,
                               const ConstraintSpec& spec) const {
    if (state.t >= cfg_.horizon()) throw ContractError("step: episode is over (t = H)");
    if (state.cursor >= state.slots.size()) throw ContractError("step: cursor out of range");
    if (spec.size() != kConstraintCount)
        throw ValidationError("warehouse step needs exactly four constraints");

    StepOutcome out;
    ToteSlot& slot = state.slots[state.cursor];
    if (!action.ignore && !slot.empty()) {
        auto& st = state.station(action.station);
        (action.role == Role::Source ? st.sources : st.destinations).push_back(slot);
        if (slot.occupancy == Occupancy::Large) --state.n_large;
        slot = ToteSlot{};
        out.info.dispatched = true;
    }
    state.cursor = (state.cursor + 1) % state.slots.size();

    service(state, out.info);

    const std::size_t W = cfg_.window_steps();
    state.emptied_log.push_back(out.info.emptied);
    state.window_emptied += out.info.emptied;
    if (state.emptied_log.size() > W)
        state.window_emptied -= state.emptied_log[state.emptied_log.size() - 1 - W];
    state.etph = state.window_emptied / (static_cast<double>(W) * cfg_.step_hours());

    ++state.t;
    ++state.day_step;
    out.reward = rewards(state, spec);
    out.levels = kpi_levels(state, cfg_);

    if (state.day_step == cfg_.steps_per_day && state.t < cfg_.horizon()) {
        end_of_day(state);
        out.info.day_ended = true;
    }
    return out;
}

std::pair<FloorState, RewardVector> WarehouseSim::transition(const FloorState& state,
                                                             const Action& action,
                                                             const ConstraintSpec& spec) const {
    FloorState next = state;
    auto out = step(next, action, spec);
    return {std::move(next), out.reward};
}

void WarehouseSim::end_of_day(FloorState& state) const {
    if (state.day_step != cfg_.steps_per_day)
        throw ContractError("end_of_day: called before the day is over");
    Rng& rng = state.rng;

    for (auto& slot : state.slots) {
        if (slot.empty()) continue;
        const int picked = binomial(rng, slot.n_pick, cfg_.pick_fraction);
        slot.n_item -= picked;
        slot.n_pick -= picked;
        slot.gcu = std::max(0.0, slot.gcu - picked * item_gcu(cfg_, slot.occupancy));
        if (slot.n_item == 0) slot = ToteSlot{};
    }

    const int arrivals = poisson(rng, cfg_.stow_rate);
    int placed = 0;
    for (auto& slot : state.slots) {
        if (placed == arrivals) break;
        if (!slot.empty()) continue;
        slot = new_tote(rng);
        ++placed;
    }
    state.stowed_total += placed;

    // Fisher-Yates
    for (std::size_t i = state.slots.size(); i > 1; --i) {
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        std::swap(state.slots[i - 1], state.slots[j]);
    }

    state.n_large = count_large(state);
    state.day_step = 0;
    ++state.day;
}

Features WarehouseSim::encode_observation(const FloorState& state) const {
    if (state.cursor >= state.slots.size()) throw ContractError("encode_observation: bad cursor");
    const ToteSlot& slot = state.slots[state.cursor];
    const auto q = state.queues();
    Features f;
    f.raw = {static_cast<double>(state.n_large),
             state.etph,
             static_cast<double>(q.human_source),
             static_cast<double>(q.human_dest),
             static_cast<double>(q.robot_source),
             static_cast<double>(q.robot_dest),
             static_cast<double>(slot.occupancy),
             slot.n_item >= 1 ? 1.0 / slot.n_item : 1.0,
             static_cast<double>(slot.n_item),
             static_cast<double>(slot.n_pick),
             slot.gcu,
             static_cast<double>(state.t)};

    const double etph_max =
        2.0 * (cfg_.human_servers * cfg_.human_rate + cfg_.robot_servers * cfg_.robot_rate) + 1.0;
    const std::array<double, kFeatureCount> hi = {static_cast<double>(cfg_.floor_max),
                                                  etph_max,
                                                  cfg_.queue_scale,
                                                  cfg_.queue_scale,
                                                  cfg_.queue_scale,
                                                  cfg_.queue_scale,
                                                  2.0,
                                                  1.0,
                                                  static_cast<double>(cfg_.item_max),
                                                  static_cast<double>(cfg_.item_max),
                                                  1.0,
                                                  static_cast<double>(cfg_.horizon())};
    for (std::size_t i = 0; i < kFeatureCount; ++i) f.scaled[i] = std::clamp(f.raw[i] / hi[i], 0.0, 1.0);
    return f;
}

double WarehouseSim::recompute_etph(const FloorState& state) const {
    const std::size_t W = cfg_.window_steps();
    const auto& log = state.emptied_log;
    const std::size_t from = log.size() > W ? log.size() - W : 0;
    long n = 0;
    for (std::size_t i = from; i < log.size(); ++i) n += log[i];
    return n / (static_cast<double>(W) * cfg_.step_hours());
}

int WarehouseSim::count_large(const FloorState& state) {
    return static_cast<int>(std::count_if(state.slots.begin(), state.slots.end(), [](const ToteSlot& s) {
        return s.occupancy == Occupancy::Large;
    }));
}

long WarehouseSim::total_items(const FloorState& state) {
    long n = 0;
    for (const auto& s : state.slots) n += s.n_item;
    for (const auto& st : state.stations) {
        for (const auto& s : st.sources) n += s.n_item;
        for (const auto& s : st.destinations) n += s.n_item;
    }
    return n;
}

double WarehouseSim::max_signal() const {
    // every tote in a queue came off the floor, and each day adds at most floor_max
    return static_cast<double>(cfg_.floor_max * cfg_.n_days);
}

// *************************************************************************************

WarehouseEnv::WarehouseEnv(SimConfig cfg, ConstraintSpec spec)
    : sim_(std::move(cfg)), spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.size() != kConstraintCount)
        throw ConfigError("warehouse environment needs exactly four constraints");
    state_ = sim_.reset(sim_.config().seed);
}

Observation WarehouseEnv::observe() const {
    const auto f = sim_.encode_observation(state_);
    return {std::vector<double>(f.scaled.begin(), f.scaled.end()), 0};
}

Observation WarehouseEnv::reset(std::uint64_t seed) {
    state_ = sim_.reset(seed);
    last_reward_ = {};
    last_info_ = {};
    return observe();
}

Transition WarehouseEnv::step(std::size_t action) {
    const bool collapsed = sim_.config().collapse_actions;
    const Action a = Action::from_index(action, collapsed);
    const auto out = sim_.step(state_, a, spec_);
    last_reward_ = out.reward;
    last_info_ = out.info;
    if (trace_) write_trace_record(*trace_, state_.t, action, out.reward, state_);

    const double H = static_cast<double>(horizon());
    Transition tr;
    tr.reward.resize(reward_dim());
    tr.reward[0] = out.reward[0];
    for (std::size_t i = 0; i < kConstraintCount; ++i) tr.reward[i + 1] = out.levels[i] / H;
    tr.terminal = state_.t >= horizon();
    tr.next = observe();
    return tr;
}

std::unique_ptr<EpisodicMDP> WarehouseEnv::clone() const {
    auto copy = std::make_unique<WarehouseEnv>(*this);
    copy->trace_ = nullptr;
    return copy;
}

void write_trace_record(std::ostream& out, std::size_t t, std::size_t action_index,
                        const RewardVector& reward, const FloorState& state) {
    const auto q = state.queues();
    nlohmann::json rec = {{"schema", kTraceSchemaVersion},
                          {"t", t},
                          {"action_index", action_index},
                          {"reward_vector", reward},
                          {"etph", state.etph},
                          {"n_large", state.n_large},
                          {"queues", {q.human_source, q.human_dest, q.robot_source, q.robot_dest}}};
    out << rec.dump() << '\n';
}

} // namespace morl::sim
