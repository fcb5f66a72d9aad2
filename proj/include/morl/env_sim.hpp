#pragma once

#include "morl/common.hpp"
#include "morl/mdp_core.hpp"
#include "morl/regulator.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <string>
#include <vector>

namespace morl::sim {

enum class Occupancy : std::uint8_t { Empty = 0, Large = 1, Small = 2 };
enum class Role : std::uint8_t { Source = 0, Destination = 1 };
enum class Station : std::uint8_t { Human = 0, Robot = 1 };

/// One floor slot or an in-flight tote.
struct ToteSlot {
    Occupancy occupancy = Occupancy::Empty;
    int n_item = 0;
    int n_pick = 0;  ///< items scheduled for picking
    double gcu = 0.0; ///< gross cubic utilization in [0, 1]

    bool empty() const { return occupancy == Occupancy::Empty; }
    bool operator==(const ToteSlot&) const = default;
};

/**
 * Slot decision. The action space is the product
 * {ignore, not_ignore} x {source, destination} x {human, robot}; with
 * ignore = true the remaining two fields are carried but have no effect.
 *
 * Canonical index: (ignore ? 4 : 0) + (role == Destination ? 2 : 0) +
 * (station == Robot ? 1 : 0). With collapsed actions the index space is
 * {0 = ignore, 1 + role * 2 + station}.
 */
struct Action {
    bool ignore = true;
    Role role = Role::Source;
    Station station = Station::Human;

    static Action from_index(std::size_t index, bool collapsed = false);
    std::size_t index(bool collapsed = false) const;
    bool operator==(const Action&) const = default;
};

inline constexpr std::size_t kActionCount = 8;
inline constexpr std::size_t kCollapsedActionCount = 5;
inline constexpr std::size_t kFeatureCount = 12;
inline constexpr std::size_t kConstraintCount = 4;

/// (r_0, ..., r_4)
using RewardVector = std::array<double, 5>;

struct SimConfig {
    std::size_t floor_max = 1000;
    std::size_t steps_per_day = 1440;
    std::size_t n_days = 10;
    double etph_window_hours = 1.0;
    double human_rate = 1.5; ///< source totes processed per hour by one server
    double robot_rate = 4.0;
    int human_servers = 4;   ///< parallel associates at the manual station
    int robot_servers = 1;
    double stow_rate = 60.0; ///< mean new totes per day (Poisson)
    double pick_fraction = 0.5;
    double init_large_fraction = 0.5;
    double init_fill = 0.85; ///< fraction of slots occupied at reset
    int item_min = 1;
    int item_max = 12;
    double pick_demand = 0.2; ///< per-item probability of being scheduled for picking
    double large_item_gcu = 0.05;
    double small_item_gcu = 0.08;
    double dest_eject_gcu = 0.95;
    double queue_scale = 20.0; ///< queue length mapped to 1.0 in scaled features
    bool collapse_actions = false;
    std::uint64_t seed = 1;

    std::size_t horizon() const { return steps_per_day * n_days; }
    double step_hours() const { return 24.0 / static_cast<double>(steps_per_day); }
    std::size_t window_steps() const;
    std::size_t action_count() const {
        return collapse_actions ? kCollapsedActionCount : kActionCount;
    }
    /// Throws ConfigError on zero horizon, empty floor, fractions outside [0,1]
    /// or negative rates.
    void validate() const;
};

/// 288 steps/day, 1 day, 200 slots.
SimConfig desk_config();
/// 1440 steps/day, 10 days, 1000 slots.
SimConfig full_scale_config();

struct StationState {
    std::deque<ToteSlot> sources;
    std::deque<ToteSlot> destinations;
    bool operator==(const StationState&) const = default;
};

struct QueueLengths {
    int human_source = 0;
    int human_dest = 0;
    int robot_source = 0;
    int robot_dest = 0;
};

struct FloorState {
    std::vector<ToteSlot> slots;
    std::size_t cursor = 0;
    std::array<StationState, 2> stations; ///< indexed by Station
    double etph = 0.0;
    int n_large = 0;
    std::size_t t = 0;
    std::size_t day_step = 0;
    std::size_t day = 0;
    /// emptied source totes per elapsed step (the ETPH event log)
    std::vector<int> emptied_log;
    int window_emptied = 0;
    long stowed_total = 0;
    Rng rng;

    QueueLengths queues() const;
    const StationState& station(Station s) const { return stations[static_cast<int>(s)]; }
    StationState& station(Station s) { return stations[static_cast<int>(s)]; }
    bool operator==(const FloorState&) const = default;
};

/// What happened inside one step, beyond the state change.
struct StepInfo {
    int emptied = 0;             ///< source totes emptied this step
    int ejected_destinations = 0;
    int robot_failures = 0;
    long items_ejected = 0;      ///< items leaving with full destination totes
    bool dispatched = false;
    bool day_ended = false;
};

struct StepOutcome {
    RewardVector reward{};
    /// KPI levels the rewards were computed from (see kpi_levels)
    std::array<double, kConstraintCount> levels{};
    StepInfo info;
};

struct Features {
    std::array<double, kFeatureCount> raw{};
    std::array<double, kFeatureCount> scaled{};
};

/// KPI levels behind the constraint rewards: large-tote fraction, S/D ratio,
/// human queue total and robot queue total.
std::array<double, kConstraintCount> kpi_levels(const FloorState& state, const SimConfig& cfg);

/// Constraint spec for the floor from its labelled bounds: large-tote fraction
/// <= large_fraction, S/D >= sd_ratio, human queue <= human_cap, robot queue <=
/// robot_cap.
ConstraintSpec floor_constraints(double large_fraction, double sd_ratio, double human_cap,
                                 double robot_cap, double cap_C);

/// Desk-scale thresholds for desk_config().
ConstraintSpec desk_constraints();

/**
 * Event-driven warehouse floor. Every operation takes the floor state
 * explicitly, so one simulator can drive many independent episodes.
 */
class WarehouseSim {
  public:
    explicit WarehouseSim(SimConfig cfg);

    const SimConfig& config() const { return cfg_; }

    FloorState reset(std::uint64_t seed) const;

    /// Applies `action` to the slot under the cursor, advances the cursor,
    /// runs station service for the elapsed step and, at the end of a day
    /// (except the last), runs end_of_day. Rewards are computed from the
    /// post-service state before the end-of-day stow/pick/shuffle.
    StepOutcome step(FloorState& state, const Action& action, const ConstraintSpec& spec) const;

    /// Value-semantics variant of step().
    std::pair<FloorState, RewardVector> transition(const FloorState& state, const Action& action,
                                                   const ConstraintSpec& spec) const;

    /// Picks, stow arrivals and the Fisher-Yates shuffle. Requires
    /// day_step == steps_per_day.
    void end_of_day(FloorState& state) const;

    Features encode_observation(const FloorState& state) const;

    /// Rewards from a state per the five KPI formulas.
    RewardVector rewards(const FloorState& next, const ConstraintSpec& spec) const;

    /// ETPH from the event log alone.
    double recompute_etph(const FloorState& state) const;
    static int count_large(const FloorState& state);
    /// Items on the floor plus items in station queues.
    static long total_items(const FloorState& state);

    /// max per-step signal used in the reward bound |r_i| <= (|alpha_i| + S_max)/H
    double max_signal() const;

  private:
    ToteSlot new_tote(Rng& rng) const;
    void service(FloorState& state, StepInfo& info) const;
    void process_station(FloorState& state, Station which, StepInfo& info) const;

    SimConfig cfg_;
};

/**
 * EpisodicMDP view of the floor for learners. Reward component 0 is ETPH;
 * components 1..4 are the KPI levels divided by H, so the episodic value of
 * component i is the time-averaged level and the canonical constraint reads
 * sign_i * V_i <= alpha_i under floor_constraints().
 */
class WarehouseEnv final : public EpisodicMDP {
  public:
    WarehouseEnv(SimConfig cfg, ConstraintSpec spec);

    std::size_t action_count() const override { return sim_.config().action_count(); }
    std::size_t horizon() const override { return sim_.config().horizon(); }
    std::size_t reward_dim() const override { return 1 + kConstraintCount; }
    std::size_t observation_dim() const override { return kFeatureCount; }
    Observation reset(std::uint64_t seed) override;
    Transition step(std::size_t action) override;
    std::unique_ptr<EpisodicMDP> clone() const override;

    const WarehouseSim& sim() const { return sim_; }
    const FloorState& state() const { return state_; }
    const ConstraintSpec& constraints() const { return spec_; }
    /// Slack-form reward vector of the last step, (alpha_i - sign_i level_i) / H.
    const RewardVector& last_reward() const { return last_reward_; }
    const StepInfo& last_info() const { return last_info_; }

    /// When set, each step appends one trace record (see write_trace_record).
    void set_trace(std::ostream* out) { trace_ = out; }

  private:
    Observation observe() const;

    WarehouseSim sim_;
    ConstraintSpec spec_;
    FloorState state_;
    RewardVector last_reward_{};
    StepInfo last_info_{};
    std::ostream* trace_ = nullptr;
};

inline constexpr int kTraceSchemaVersion = 1;

/// One NDJSON line: {"schema":1,"t":..,"action_index":..,"reward_vector":[..],
/// "etph":..,"n_large":..,"queues":[LHS,LHD,LRS,LRD]}
void write_trace_record(std::ostream& out, std::size_t t, std::size_t action_index,
                        const RewardVector& reward, const FloorState& state);

} // namespace morl::sim
