#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "netanalyzer/audit.hpp"
#include "netanalyzer/clock.hpp"
#include "netanalyzer/config.hpp"
#include "netanalyzer/events.hpp"
#include "netanalyzer/telemetry.hpp"

namespace netanalyzer::reasoning {

enum class Mode { Event, Next, Human, Stop };
std::string_view to_string(Mode mode);
std::optional<Mode> mode_from_string(std::string_view name);

inline constexpr std::array<std::string_view, 3> kToolWhitelist{"LOG_QUERY", "METRIC_QUERY",
                                                                "CONFIG_GET"};
bool is_whitelisted(std::string_view tool);

// params: LogQuery | MetricQuery document, or {"path": selector} for CONFIG_GET.
struct ToolRequest {
    std::string tool;
    nlohmann::json params = nlohmann::json::object();

    bool operator==(const ToolRequest&) const = default;
};

struct ProposalDraft {
    config::ConfigPatch patch;
    std::string rationale;

    bool operator==(const ProposalDraft&) const = default;
};

enum class IntentType { Continue, AskHuman, Stop };
std::string_view to_string(IntentType type);

struct ControlIntent {
    IntentType type = IntentType::Stop;
    std::optional<ToolRequest> request;     // CONTINUE
    std::string text;                       // ASK_HUMAN question / STOP summary
    std::optional<ProposalDraft> proposal;  // ASK_HUMAN only

    bool operator==(const ControlIntent&) const = default;

    static ControlIntent continue_with(ToolRequest request);
    static ControlIntent ask_human(std::string question, std::optional<ProposalDraft> draft = {});
    static ControlIntent stop(std::string summary);
};

// Mode an intent leads to when the orchestrator accepts it.
Mode resulting_mode(IntentType type);

nlohmann::json to_json(const ControlIntent& intent);
// Strict schema; throws ParseFailure on any deviation, including tools
// outside the whitelist.
ControlIntent control_intent_from_json(const nlohmann::json& doc);

enum class ToolStatus { Ok, GateRejected, Error };
std::string_view to_string(ToolStatus status);

struct ToolResult {
    std::string tool;
    ToolStatus status = ToolStatus::Ok;
    nlohmann::json payload;
    std::string error;
    std::string digest;
};

nlohmann::json to_json(const ToolResult& result);

struct AgentOutput {
    std::string explanation;
    ControlIntent intent;
};

enum class HumanInputKind { Text, Decision };

struct HumanInput {
    HumanInputKind kind = HumanInputKind::Text;
    std::string text;
    std::string proposal_id;
    config::Decision decision = config::Decision::Approve;
    std::string operator_id = "operator";

    static HumanInput chat(std::string text, std::string operator_id = "operator");
    static HumanInput decide(std::string proposal_id, config::Decision decision,
                             std::string operator_id = "operator");
};

// An operator turn as the agent sees it. `outcome` is the proposal status
// after an approval/rejection was routed (APPLIED, REJECTED, FAILED, ...).
struct HumanTurn {
    std::size_t after_step = 0;
    std::string text;
    std::string operator_id;
    std::string proposal_id;
    std::string outcome;
    std::optional<nlohmann::json> apply_report;
    std::int64_t timestamp_ms = 0;
};

nlohmann::json to_json(const HumanTurn& turn, bool timestamps = true);

struct ReasoningStep {
    std::size_t index = 0;
    Mode mode = Mode::Event;           // at emission
    Mode resulting_mode = Mode::Stop;  // after the orchestrator acted on the intent
    std::string label;                 // e.g. NEXT(LOG_QUERY), HUMAN(proposal)
    std::string explanation;
    ControlIntent intent;
    Actor actor = Actor::Agent;
    std::optional<ToolResult> tool_result;
    std::string tool_result_digest;
    std::string proposal_id;
    bool forced = false;
    std::optional<ControlIntent> overridden_intent;
    std::vector<std::string> rejected_attempts;
    std::int64_t timestamp_ms = 0;
};

nlohmann::json to_json(const ReasoningStep& step, bool timestamps = true);
ReasoningStep reasoning_step_from_json(const nlohmann::json& doc);

struct ReasoningCycle {
    std::string cycle_id;
    events::EventBatch batch;
    std::set<int> ue_key;
    int iteration = 0;
    int cap = 5;
    Mode mode = Mode::Event;
    std::vector<ReasoningStep> steps;
    std::vector<HumanTurn> human_turns;
    bool parked_for_human = false;
    std::string pending_proposal_id;
    std::size_t tool_dispatches = 0;
    std::string agent_name;
};

// "EVENT" followed by each step's label.
std::vector<std::string> mode_trace(const ReasoningCycle& cycle);
// Modes at emission followed by the current mode must read EVENT NEXT{0,cap} HUMAN* STOP
// (or end in HUMAN while parked).
bool mode_grammar_ok(const ReasoningCycle& cycle);

nlohmann::json to_json(const ReasoningCycle& cycle, bool timestamps = true);
// One record per step, newline-delimited.
std::string export_trace_ndjson(const ReasoningCycle& cycle);

inline constexpr std::size_t kMaxRenderedStepChars = 20000;

struct AgentContext {
    std::string cycle_id;
    Mode mode = Mode::Event;
    int iteration = 0;
    int cap = 5;
    events::EventBatch batch;
    std::vector<ReasoningStep> steps;
    std::vector<HumanTurn> human_turns;
    std::optional<HumanTurn> pending_human;
    std::string pending_proposal_id;
};

nlohmann::json batch_summary(const events::EventBatch& batch);
// Deterministic text rendering; the prior-steps section keeps only the most
// recent kMaxRenderedStepChars characters' worth of whole steps.
std::string render_context(const AgentContext& ctx);

class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string name() const = 0;
    // May throw AgentProtocolError (or anything else; the orchestrator treats
    // every exception as a protocol failure of that attempt).
    virtual AgentOutput analyze(const AgentContext& ctx) = 0;
};

// The only path from an agent to the stores. Read-only by construction: it
// holds the config service but calls nothing except select().
class ToolGateway {
public:
    ToolGateway(telemetry::TelemetryStore& telemetry, config::ConfigService& config,
                AuditLog& audit)
        : telemetry_(telemetry), config_(config), audit_(audit) {}

    ToolResult dispatch(const ToolRequest& request, const std::string& cycle_id);

private:
    telemetry::TelemetryStore& telemetry_;
    config::ConfigService& config_;
    AuditLog& audit_;
};

struct OrchestratorOptions {
    int cap = 5;
    int retries = 2;
};

// Cycle lifecycle: EVENT -> NEXT* -> (HUMAN <-> operator)* -> STOP.
// Per-cycle state is serialized; cycles over disjoint UE sets may step
// concurrently.
class Orchestrator {
public:
    Orchestrator(ToolGateway& gateway, config::ConfigService& config, AuditLog& audit,
                 Clock clock = system_clock(), OrchestratorOptions options = {});

    Orchestrator(const Orchestrator&) = delete;
    Orchestrator& operator=(const Orchestrator&) = delete;

    // Throws CycleConflict while a non-STOP cycle shares a UE with the batch.
    std::string start_cycle(events::EventBatch batch, Agent& agent, std::optional<int> cap = {});

    // One agent invocation (with retries). Throws CycleFinished / CycleParked.
    ReasoningCycle step(const std::string& cycle_id);
    // Steps until STOP or parked.
    ReasoningCycle run(const std::string& cycle_id);
    // Routes the operator turn (approval -> decide + apply), re-invokes the
    // agent once. Throws NotParked.
    ReasoningCycle resume_with_human_input(const std::string& cycle_id, HumanInput input);

    ReasoningCycle cycle(const std::string& cycle_id) const;
    std::vector<ReasoningCycle> cycles() const;
    // Parked cycle whose pending proposal is `proposal_id`, if any.
    std::optional<std::string> cycle_for_proposal(const std::string& proposal_id) const;
    std::optional<std::string> latest_parked_cycle() const;
    bool conflicts(const std::set<int>& ue_ids) const;

    const OrchestratorOptions& options() const { return options_; }

private:
    struct Slot {
        std::mutex mu;
        ReasoningCycle cycle;
        Agent* agent = nullptr;
        std::optional<HumanTurn> pending_human;
    };

    std::shared_ptr<Slot> slot(const std::string& cycle_id) const;
    void step_locked(Slot& slot);
    void record_step(Slot& slot, ReasoningStep step, const std::string& context_digest);
    // Mirrors the cycle's scheduling state into the registry (slot lock held;
    // the registry lock is only ever taken after a slot lock, never before).
    void publish(const ReasoningCycle& cycle);

    ToolGateway& gateway_;
    config::ConfigService& config_;
    AuditLog& audit_;
    Clock clock_;
    OrchestratorOptions options_;

    struct Status {
        std::set<int> ue_key;
        bool active = true;
        bool parked = false;
        std::string pending_proposal_id;
    };

    mutable std::mutex registry_mu_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
    std::map<std::string, Status> status_;
    std::vector<std::string> order_;
    std::uint64_t next_cycle_ = 1;
};

}  // namespace netanalyzer::reasoning
