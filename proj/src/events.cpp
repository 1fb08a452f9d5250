#include "netanalyzer/events.hpp"

#include <cmath>

#include "netanalyzer/digest.hpp"
#include "netanalyzer/error.hpp"

namespace netanalyzer::events {

using nlohmann::json;

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::A3Trigger: return "A3_TRIGGER";
    case EventKind::HoAttempt: return "HO_ATTEMPT";
    case EventKind::HoSuccess: return "HO_SUCCESS";
    case EventKind::HoFailure: return "HO_FAILURE";
    }
    return "HO_FAILURE";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
    for (auto k : {EventKind::A3Trigger, EventKind::HoAttempt, EventKind::HoSuccess,
                   EventKind::HoFailure})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

std::string_view to_string(TriggerReason reason) {
    return reason == TriggerReason::Count ? "COUNT" : "QUIESCENCE";
}

json to_wire(const NormalizedEvent& e) {
    json doc = {
        {"schema_version", kWireSchemaVersion},
        {"event_id", e.event_id},
        {"time_s", e.time_s},
        {"ue_id", e.ue_id},
        {"kind", to_string(e.kind)},
        {"source_cell", e.source_cell},
        {"target_cell", e.target_cell},
    };
    if (e.rsrp_serving_dbm) doc["rsrp_serving_dbm"] = *e.rsrp_serving_dbm;
    if (e.rsrp_neighbor_dbm) doc["rsrp_neighbor_dbm"] = *e.rsrp_neighbor_dbm;
    if (e.trigger_margin_db) doc["trigger_margin_db"] = *e.trigger_margin_db;
    for (const auto& [k, v] : e.aux) doc[k] = v;
    return doc;
}

namespace {

const std::set<std::string> kKnownFields{
    "schema_version", "event_id",          "time_s",         "ue_id",
    "kind",           "source_cell",       "target_cell",    "rsrp_serving_dbm",
    "rsrp_neighbor_dbm", "trigger_margin_db", "a3",
};

const json& require(const json& p, const char* field) {
    auto it = p.find(field);
    if (it == p.end() || it->is_null()) throw MalformedEvent(field);
    return *it;
}

int require_int(const json& p, const char* field) {
    const json& v = require(p, field);
    if (!v.is_number_integer()) throw MalformedEvent(field);
    return v.get<int>();
}

double require_number(const json& v, const char* field) {
    if (!v.is_number()) throw MalformedEvent(field);
    double d = v.get<double>();
    if (!std::isfinite(d)) throw MalformedEvent(field);
    return d;
}

std::optional<double> optional_number(const json& p, const char* field) {
    auto it = p.find(field);
    if (it == p.end() || it->is_null()) return std::nullopt;
    return require_number(*it, field);
}

}  // namespace

NormalizedEvent normalize(const RawEvent& raw) {
    const json& p = raw.payload;
    if (!p.is_object() || p.empty()) throw MalformedEvent("payload");

    const json& version = require(p, "schema_version");
    if (!version.is_number_integer() || version.get<int>() != kWireSchemaVersion)
        throw MalformedEvent("schema_version");

    NormalizedEvent e;
    const json& id = require(p, "event_id");
    if (!id.is_string() || id.get<std::string>().empty()) throw MalformedEvent("event_id");
    e.event_id = id.get<std::string>();

    e.ue_id = require_int(p, "ue_id");

    const json& kind = require(p, "kind");
    if (!kind.is_string()) throw MalformedEvent("kind");
    auto k = event_kind_from_string(kind.get<std::string>());
    if (!k) throw MalformedEvent("kind");
    e.kind = *k;

    e.time_s = require_number(require(p, "time_s"), "time_s");
    if (e.time_s < 0.0) throw MalformedEvent("time_s");

    e.source_cell = require_int(p, "source_cell");
    e.target_cell = require_int(p, "target_cell");
    if (e.source_cell == e.target_cell) throw MalformedEvent("target_cell");

    e.rsrp_serving_dbm = optional_number(p, "rsrp_serving_dbm");
    e.rsrp_neighbor_dbm = optional_number(p, "rsrp_neighbor_dbm");
    e.trigger_margin_db = optional_number(p, "trigger_margin_db");

    if (e.kind == EventKind::A3Trigger) {
        if (!e.rsrp_serving_dbm) throw MalformedEvent("rsrp_serving_dbm");
        if (!e.rsrp_neighbor_dbm) throw MalformedEvent("rsrp_neighbor_dbm");
        if (auto a3 = p.find("a3"); a3 != p.end() && !a3->is_null()) {
            if (!a3->is_object()) throw MalformedEvent("a3");
            double offset = require_number(require(*a3, "offset_db"), "a3.offset_db");
            double hyst = require_number(require(*a3, "hysteresis_db"), "a3.hysteresis_db");
            e.trigger_margin_db =
                (*e.rsrp_neighbor_dbm - *e.rsrp_serving_dbm) - (offset + hyst);
        }
    }

    for (auto it = p.begin(); it != p.end(); ++it)
        if (!kKnownFields.contains(it.key())) e.aux.emplace(it.key(), it.value());
    if (auto a3 = p.find("a3"); a3 != p.end()) e.aux.emplace("a3", *a3);
    return e;
}

void BatchPolicy::validate() const {
    if (quiescence_ms <= 0) throw InvalidConfig("quiescence_ms");
    if (max_count < 1) throw InvalidConfig("max_count");
}

std::set<int> EventBatch::ue_ids() const {
    std::set<int> ids;
    for (const auto& e : events) ids.insert(e.ue_id);
    return ids;
}

json to_json(const EventBatch& b) {
    json events = json::array();
    for (const auto& e : b.events) events.push_back(to_wire(e));
    return {
        {"batch_id", b.batch_id},
        {"trigger_reason", to_string(b.trigger_reason)},
        {"created_at_ms", b.created_at_ms},
        {"last_ingest_ms", b.last_ingest_ms},
        {"events", std::move(events)},
    };
}

EventPipeline::EventPipeline(PipelineOptions options, AuditLog* audit)
    : options_(options), audit_(audit) {
    if (options_.hard_cap < 1) throw InvalidConfig("hard_cap");
}

std::size_t EventPipeline::ingest(NormalizedEvent event, std::int64_t now_ms) {
    std::size_t depth;
    std::string id = event.event_id;
    {
        std::lock_guard lk(mu_);
        if (queue_.size() >= options_.hard_cap) throw QueueFull(std::to_string(queue_.size()));
        if (!seen_ids_.insert(event.event_id).second)
            throw MalformedEvent("event_id duplicate: " + event.event_id);
        queue_.push_back({std::move(event), now_ms});
        last_ingest_ms_ = now_ms;
        depth = queue_.size();
    }
    if (audit_) audit_->append(Actor::Orchestrator, AuditAction::EventIngest, id);
    return depth;
}

std::optional<NormalizedEvent> EventPipeline::submit(const RawEvent& raw, std::int64_t now_ms) {
    std::string reason;
    try {
        NormalizedEvent e = normalize(raw);
        NormalizedEvent copy = e;
        ingest(std::move(e), now_ms);
        return copy;
    } catch (const MalformedEvent& err) {
        reason = err.detail();
    }
    {
        std::lock_guard lk(mu_);
        quarantine_.push_back({raw, reason});
    }
    if (audit_)
        audit_->append(Actor::Orchestrator, AuditAction::EventQuarantine, reason,
                       digest(raw.payload), {}, "MalformedEvent");
    return std::nullopt;
}

std::optional<EventBatch> EventPipeline::poll_batch(const BatchPolicy& policy,
                                                    std::int64_t now_ms) {
    policy.validate();
    EventBatch batch;
    {
        std::lock_guard lk(mu_);
        if (queue_.empty()) return std::nullopt;

        std::size_t take;
        if (queue_.size() >= policy.max_count) {
            batch.trigger_reason = TriggerReason::Count;
            take = policy.max_count;
        } else if (now_ms - last_ingest_ms_ >= policy.quiescence_ms) {
            batch.trigger_reason = TriggerReason::Quiescence;
            take = queue_.size();
        } else {
            return std::nullopt;
        }

        batch.events.reserve(take);
        for (std::size_t i = 0; i < take; ++i) {
            batch.last_ingest_ms = queue_.front().ingested_at_ms;
            batch.events.push_back(std::move(queue_.front().event));
            queue_.pop_front();
        }
        batch.batch_id = "batch-" + std::to_string(next_batch_++);
        batch.created_at_ms = now_ms;
        emitted_.push_back(batch);
    }
    if (audit_)
        audit_->append(Actor::Orchestrator, AuditAction::BatchEmit, batch.batch_id, {},
                       digest(to_json(batch)));
    return batch;
}

std::size_t EventPipeline::depth() const {
    std::lock_guard lk(mu_);
    return queue_.size();
}

std::vector<QuarantinedEvent> EventPipeline::quarantine() const {
    std::lock_guard lk(mu_);
    return quarantine_;
}

std::vector<EventBatch> EventPipeline::emitted_batches() const {
    std::lock_guard lk(mu_);
    return emitted_;
}

}  // namespace netanalyzer::events
