#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "netanalyzer/audit.hpp"

namespace netanalyzer::events {

inline constexpr int kWireSchemaVersion = 1;

enum class EventKind { A3Trigger, HoAttempt, HoSuccess, HoFailure };

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);

struct NormalizedEvent {
    std::string event_id;
    double time_s = 0.0;
    int ue_id = 0;
    EventKind kind = EventKind::HoSuccess;
    int source_cell = 0;
    int target_cell = 0;
    std::optional<double> rsrp_serving_dbm;
    std::optional<double> rsrp_neighbor_dbm;
    std::optional<double> trigger_margin_db;
    // Fields the mapping does not know about, kept verbatim for audit.
    std::map<std::string, nlohmann::json> aux;

    bool operator==(const NormalizedEvent&) const = default;
};

enum class EventSource { Sim, External };

struct RawEvent {
    EventSource source = EventSource::External;
    nlohmann::json payload;
    std::int64_t received_at_ms = 0;
};

// Wire document for one event: NormalizedEvent fields plus schema_version.
nlohmann::json to_wire(const NormalizedEvent& event);

// Maps a raw payload onto a NormalizedEvent. A3_TRIGGER payloads that carry an
// `a3` snapshot get trigger_margin_db = (Mn - Mp) - (offset + hysteresis).
// Throws MalformedEvent naming the first offending field.
NormalizedEvent normalize(const RawEvent& raw);

struct BatchPolicy {
    std::int64_t quiescence_ms = 2000;
    std::size_t max_count = 50;

    void validate() const;
};

enum class TriggerReason { Quiescence, Count };
std::string_view to_string(TriggerReason reason);

struct EventBatch {
    std::string batch_id;
    std::vector<NormalizedEvent> events;
    TriggerReason trigger_reason = TriggerReason::Quiescence;
    std::int64_t created_at_ms = 0;
    // Ingestion time of the newest event in the batch.
    std::int64_t last_ingest_ms = 0;

    std::set<int> ue_ids() const;
};

nlohmann::json to_json(const EventBatch& batch);

struct QuarantinedEvent {
    RawEvent raw;
    std::string reason;
};

struct PipelineOptions {
    std::size_t hard_cap = 10000;
};

// Bounded FIFO between ingestion and reasoning. Every accepted event leaves
// through exactly one batch; malformed events go to the quarantine store.
class EventPipeline {
public:
    explicit EventPipeline(PipelineOptions options = {}, AuditLog* audit = nullptr);

    EventPipeline(const EventPipeline&) = delete;
    EventPipeline& operator=(const EventPipeline&) = delete;

    // Throws QueueFull at the hard cap, MalformedEvent on a duplicate id.
    std::size_t ingest(NormalizedEvent event, std::int64_t now_ms);

    // normalize() + ingest(); malformed payloads are quarantined and nullopt
    // is returned. QueueFull still propagates.
    std::optional<NormalizedEvent> submit(const RawEvent& raw, std::int64_t now_ms);

    std::optional<EventBatch> poll_batch(const BatchPolicy& policy, std::int64_t now_ms);

    std::size_t depth() const;
    std::size_t hard_cap() const { return options_.hard_cap; }
    std::vector<QuarantinedEvent> quarantine() const;
    std::vector<EventBatch> emitted_batches() const;

private:
    struct Entry {
        NormalizedEvent event;
        std::int64_t ingested_at_ms;
    };

    PipelineOptions options_;
    AuditLog* audit_;
    mutable std::mutex mu_;
    std::deque<Entry> queue_;
    std::set<std::string> seen_ids_;
    std::vector<QuarantinedEvent> quarantine_;
    std::vector<EventBatch> emitted_;
    std::int64_t last_ingest_ms_ = 0;
    std::uint64_t next_batch_ = 1;
};

}  // namespace netanalyzer::events
