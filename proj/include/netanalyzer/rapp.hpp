#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "netanalyzer/audit.hpp"
#include "netanalyzer/config.hpp"
#include "netanalyzer/events.hpp"
#include "netanalyzer/ran/simulator.hpp"
#include "netanalyzer/reasoning.hpp"

namespace netanalyzer::rapp {

inline constexpr int kScenarioSchemaVersion = 1;

struct ScenarioSpec {
    std::string scenario_id = "reference";
    // Cells, trajectory, radio and timing. Per-cell a3 is overwritten by the
    // misconfigured preset when a run starts.
    ran::SimulationSpec sim;
    ran::A3Config misconfigured{2.0, 2.0, 100};
    ran::A3Config corrected{4.0, 4.0, 320};
    std::array<double, 2> crossing_interval_s{25.0, 60.0};
    double ping_pong_window_s = ran::kDefaultPingPongWindowS;
    events::BatchPolicy batch_policy;
    int iteration_cap = 5;
    // Scenario seconds per second of pipeline time when events are replayed.
    double replay_speedup = 10.0;

    // Throws InvalidScenario("<field>: <reason>").
    void validate() const;
    ran::SimulationSpec with_a3(const ran::A3Config& a3) const;
};

// The two-cell ping-pong scenario: gNB-30 and gNB-31 15 m apart, UE 17 walks
// in, zigzags across the cell edge between 25 s and 60 s, then settles under
// gNB-31. Identical to scenarios/reference.json.
ScenarioSpec reference_scenario();

nlohmann::json to_json(const ScenarioSpec& spec);
// Strict: unknown keys and missing required fields are InvalidScenario.
ScenarioSpec scenario_from_json(const nlohmann::json& doc);
ScenarioSpec load_scenario(const std::filesystem::path& path);

enum class RunMode { Baseline, WithRapp };
std::string_view to_string(RunMode mode);
RunMode run_mode_from_string(std::string_view name);

enum class RunStatus { Completed, AwaitingApproval };
std::string_view to_string(RunStatus status);

struct PhaseResult {
    std::string name;
    std::map<int, ran::A3Config> a3;
    std::vector<ran::HandoverRecord> handovers;
    ran::FpsTrace fps;
    std::size_t ping_pongs_total = 0;
    std::size_t ping_pongs_crossing = 0;
    double fps_variance_crossing = 0.0;
};

// Population variance of the FPS samples whose second lies in [from, to).
double fps_variance(const ran::FpsTrace& trace, double from_s, double to_s);

struct RunReport {
    std::string scenario_id;
    RunMode mode = RunMode::Baseline;
    RunStatus status = RunStatus::Completed;
    std::uint64_t seed = 0;
    std::array<double, 2> crossing_interval_s{};
    std::vector<PhaseResult> phases;
    std::vector<events::EventBatch> batches;
    std::vector<reasoning::ReasoningCycle> cycles;
    std::vector<config::Proposal> proposals;
    std::vector<config::VersionChange> versions;
    std::uint64_t config_version = 0;
    nlohmann::json config_export;
    std::vector<AuditRecord> audit;
    std::int64_t started_at_ms = 0;
    std::int64_t finished_at_ms = 0;

    const PhaseResult* phase(std::string_view name) const;
    // {"report": ..., "timestamps": ...}; "report" alone is reproducible.
    nlohmann::json to_json() const;
    nlohmann::json report_section() const;
};

// Scripted operator turns used when auto_approve is set.
inline constexpr std::string_view kOperatorQuestion = "What configuration values do you recommend?";
inline constexpr std::string_view kOperatorApproval = "Approve.";

struct ExperimentOptions {
    RunMode mode = RunMode::Baseline;
    bool auto_approve = false;
    // Defaults to a RuleAgent owned by the run.
    reasoning::Agent* agent = nullptr;
    // Called with one small document per notable event (phase done, step, ...).
    std::function<void(const nlohmann::json&)> on_progress;
    // Called with each cycle once it stops or parks.
    std::function<void(const reasoning::ReasoningCycle&)> on_cycle;
};

RunReport run_experiment(const ScenarioSpec& spec, const ExperimentOptions& options);

}  // namespace netanalyzer::rapp
