#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "netanalyzer/events.hpp"
#include "netanalyzer/ran/a3.hpp"
#include "netanalyzer/ran/radio.hpp"

namespace netanalyzer::ran {

struct Waypoint {
    double time_s = 0.0;
    double x_m = 0.0;
    double y_m = 0.0;

    bool operator==(const Waypoint&) const = default;
};

struct UETrajectory {
    int ue_id = 0;
    std::vector<Waypoint> waypoints;

    bool operator==(const UETrajectory&) const = default;

    void validate() const;
    double start_s() const { return waypoints.front().time_s; }
    double end_s() const { return waypoints.back().time_s; }
    Vec2 position_at(double time_s) const;
};

enum class HandoverOutcome { Success, Failure };

struct HandoverRecord {
    double time_s = 0.0;
    int ue_id = 0;
    int source_cell = 0;
    int target_cell = 0;
    HandoverOutcome outcome = HandoverOutcome::Success;
    double trigger_margin_db = 0.0;

    bool operator==(const HandoverRecord&) const = default;
};

nlohmann::json to_json(const HandoverRecord& record);

struct FpsSample {
    int second_index = 0;
    double fps = 0.0;

    bool operator==(const FpsSample&) const = default;
};

struct FpsTrace {
    std::vector<FpsSample> samples;
    double nominal_fps = 30.0;

    bool operator==(const FpsTrace&) const = default;
};

nlohmann::json to_json(const FpsTrace& trace);

struct SimulationSpec {
    std::vector<CellConfig> cells;
    UETrajectory trajectory;
    RadioParams radio;
    std::uint64_t seed = 42;
    int tick_ms = 10;
    int ho_execution_delay_ms = 50;
    int interruption_ms = 500;
    double nominal_fps = 30.0;
    // Strongest cell at the first tick when unset.
    std::optional<int> initial_serving_cell;

    bool operator==(const SimulationSpec&) const = default;

    // Throws InvalidScenario("<field>: <reason>").
    void validate() const;
    const CellConfig& cell(int cell_id) const;
};

struct ScenarioOutput {
    std::vector<events::NormalizedEvent> events;
    std::vector<HandoverRecord> handovers;
    std::vector<RadioSample> radio;
    FpsTrace fps;
    // A3 configuration snapshot attached to every A3_TRIGGER, keyed by event_id.
    std::map<std::string, A3Config> trigger_configs;
};

// Fixed-tick simulation of one UE across the configured cells. Identical
// spec (including seed) gives bit-identical output.
ScenarioOutput run_scenario(const SimulationSpec& spec);

// Wire payloads for the simulator's events, with the A3 snapshot attached to
// A3_TRIGGER events.
std::vector<events::RawEvent> to_raw_events(const ScenarioOutput& output);

inline constexpr double kDefaultPingPongWindowS = 5.0;

// Pairs (A->B at t1, B->A at t2) for the same UE with 0 < t2 - t1 <= window_s,
// matched greedily earliest-first; each record is used at most once.
std::size_t count_ping_pongs(std::span<const HandoverRecord> handovers,
                             double window_s = kDefaultPingPongWindowS);

// Handovers with from_s <= time_s <= to_s.
std::vector<HandoverRecord> handovers_between(std::span<const HandoverRecord> handovers,
                                              double from_s, double to_s);

// Each handover blanks [t, t + interruption) of the uplink; second k reports
// nominal * (1 - blanked fraction of [k, k + 1)).
FpsTrace compute_fps(std::span<const HandoverRecord> handovers, double duration_s,
                     double nominal_fps, int interruption_ms = 500);

}  // namespace netanalyzer::ran
