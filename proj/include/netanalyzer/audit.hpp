#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "netanalyzer/clock.hpp"

namespace netanalyzer {

enum class Actor { Agent, Operator, Orchestrator };

enum class AuditAction {
    EventIngest,
    EventQuarantine,
    BatchEmit,
    CycleStart,
    ReasoningStep,
    ToolDispatch,
    HumanInput,
    ConfigRead,
    Propose,
    Decide,
    Apply,
    CycleStop,
};

std::string_view to_string(Actor actor);
std::string_view to_string(AuditAction action);
std::optional<AuditAction> audit_action_from_string(std::string_view name);

struct AuditRecord {
    std::uint64_t seq = 0;
    Actor actor = Actor::Orchestrator;
    AuditAction action = AuditAction::EventIngest;
    std::string subject;
    std::string request_digest;
    std::string response_digest;
    // "ok" or the error code the operation raised.
    std::string outcome = "ok";
    std::int64_t timestamp_ms = 0;
};

nlohmann::json to_json(const AuditRecord& record);

// Append-only, gapless (seq starts at 1 and increments by one per record).
class AuditLog {
public:
    explicit AuditLog(Clock clock = system_clock()) : clock_(std::move(clock)) {}

    AuditLog(const AuditLog&) = delete;
    AuditLog& operator=(const AuditLog&) = delete;

    AuditRecord append(Actor actor, AuditAction action, std::string subject,
                              std::string request_digest = {}, std::string response_digest = {},
                              std::string outcome = "ok");

    std::vector<AuditRecord> records() const;
    std::vector<AuditRecord> records_since(std::uint64_t after_seq) const;
    std::size_t size() const;

    // Newline-delimited export, one JSON record per line.
    std::string export_ndjson() const;

private:
    Clock clock_;
    mutable std::mutex mu_;
    std::vector<AuditRecord> records_;
};

}  // namespace netanalyzer
