#include "netanalyzer/audit.hpp"

#include <array>
#include <utility>

namespace netanalyzer {

namespace {

constexpr std::array<std::pair<AuditAction, std::string_view>, 12> kActionNames{{
    {AuditAction::EventIngest, "EVENT_INGEST"},
    {AuditAction::EventQuarantine, "EVENT_QUARANTINE"},
    {AuditAction::BatchEmit, "BATCH_EMIT"},
    {AuditAction::CycleStart, "CYCLE_START"},
    {AuditAction::ReasoningStep, "REASONING_STEP"},
    {AuditAction::ToolDispatch, "TOOL_DISPATCH"},
    {AuditAction::HumanInput, "HUMAN_INPUT"},
    {AuditAction::ConfigRead, "CONFIG_READ"},
    {AuditAction::Propose, "PROPOSE"},
    {AuditAction::Decide, "DECIDE"},
    {AuditAction::Apply, "APPLY"},
    {AuditAction::CycleStop, "CYCLE_STOP"},
}};

}  // namespace

std::string_view to_string(Actor actor) {
    switch (actor) {
    case Actor::Agent: return "AGENT";
    case Actor::Operator: return "OPERATOR";
    case Actor::Orchestrator: return "ORCHESTRATOR";
    }
    return "ORCHESTRATOR";
}

std::string_view to_string(AuditAction action) {
    for (const auto& [a, name] : kActionNames)
        if (a == action) return name;
    return "UNKNOWN";
}

std::optional<AuditAction> audit_action_from_string(std::string_view name) {
    for (const auto& [a, n] : kActionNames)
        if (n == name) return a;
    return std::nullopt;
}

nlohmann::json to_json(const AuditRecord& r) {
    return {
        {"seq", r.seq},
        {"actor", to_string(r.actor)},
        {"action", to_string(r.action)},
        {"subject", r.subject},
        {"request_digest", r.request_digest},
        {"response_digest", r.response_digest},
        {"outcome", r.outcome},
        {"timestamp_ms", r.timestamp_ms},
    };
}

AuditRecord AuditLog::append(Actor actor, AuditAction action, std::string subject,
                                    std::string request_digest, std::string response_digest,
                                    std::string outcome) {
    std::lock_guard lk(mu_);
    AuditRecord r;
    r.seq = records_.size() + 1;
    r.actor = actor;
    r.action = action;
    r.subject = std::move(subject);
    r.request_digest = std::move(request_digest);
    r.response_digest = std::move(response_digest);
    r.outcome = std::move(outcome);
    r.timestamp_ms = clock_();
    records_.push_back(std::move(r));
    return records_.back();
}

std::vector<AuditRecord> AuditLog::records() const {
    std::lock_guard lk(mu_);
    return records_;
}

std::vector<AuditRecord> AuditLog::records_since(std::uint64_t after_seq) const {
    std::lock_guard lk(mu_);
    if (after_seq >= records_.size()) return {};
    return {records_.begin() + static_cast<std::ptrdiff_t>(after_seq), records_.end()};
}

std::size_t AuditLog::size() const {
    std::lock_guard lk(mu_);
    return records_.size();
}

std::string AuditLog::export_ndjson() const {
    std::string out;
    for (const auto& r : records()) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

}  // namespace netanalyzer
