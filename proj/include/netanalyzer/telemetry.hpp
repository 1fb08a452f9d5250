#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "netanalyzer/events.hpp"
#include "netanalyzer/ran/radio.hpp"
#include "netanalyzer/ran/simulator.hpp"

namespace netanalyzer::telemetry {

inline constexpr std::size_t kMaxLogLimit = 500;
inline constexpr std::size_t kMaxMetricPoints = 5000;
inline constexpr double kMinDownsampleS = 0.1;
inline constexpr std::size_t kMaxDetailBytes = 1024;

struct LogRecord {
    double time_s = 0.0;
    int ue_id = 0;
    events::EventKind kind = events::EventKind::HoSuccess;
    int source_cell = 0;
    int target_cell = 0;
    std::string detail;
    std::optional<double> trigger_margin_db;
    std::string event_id;

    bool operator==(const LogRecord&) const = default;
};

nlohmann::json to_json(const LogRecord& record);
LogRecord log_record_from_json(const nlohmann::json& doc);
LogRecord log_record_from_event(const events::NormalizedEvent& event);

struct LogQuery {
    std::optional<int> ue_id;
    double from_s = 0.0;
    double to_s = 0.0;
    std::optional<std::set<events::EventKind>> kinds;
    std::size_t limit = kMaxLogLimit;

    // Throws InvalidQuery naming the offending field.
    void validate() const;
    bool matches(const LogRecord& record) const;
};

nlohmann::json to_json(const LogQuery& query);
// Strict: unknown keys and wrong types are InvalidQuery.
LogQuery log_query_from_json(const nlohmann::json& doc);

struct LogResult {
    std::vector<LogRecord> records;
    bool truncated = false;
};

nlohmann::json to_json(const LogResult& result);

enum class Series { Rsrp, Fps };
std::string_view to_string(Series series);
// Throws UnknownSeries.
Series series_from_string(std::string_view name);

struct MetricQuery {
    Series series = Series::Fps;
    std::optional<int> cell_id;
    double from_s = 0.0;
    double to_s = 0.0;
    double downsample_s = 1.0;

    void validate() const;
    std::size_t max_points() const;
};

nlohmann::json to_json(const MetricQuery& query);
MetricQuery metric_query_from_json(const nlohmann::json& doc);

struct MetricPoint {
    double time_s = 0.0;
    double value = 0.0;

    bool operator==(const MetricPoint&) const = default;
};

nlohmann::json to_json(const std::vector<MetricPoint>& points);

// Append-only log and time-series store. Readers share a lock; a record is
// either fully visible or not at all.
class TelemetryStore {
public:
    TelemetryStore() = default;
    TelemetryStore(const TelemetryStore&) = delete;
    TelemetryStore& operator=(const TelemetryStore&) = delete;

    void append_log(LogRecord record);
    void append_rsrp(const ran::RadioSample& sample);
    void append_fps(const ran::FpsTrace& trace);
    // Logs, RSRP and FPS of one simulated run.
    void ingest_scenario(const ran::ScenarioOutput& output);

    LogResult query_logs(const LogQuery& query) const;
    std::vector<MetricPoint> query_metrics(const MetricQuery& query) const;

    std::size_t log_count() const;
    std::size_t point_count() const;

    // Header line followed by one record per line.
    std::string snapshot_ndjson() const;
    void load_snapshot(std::string_view ndjson);

private:
    struct Point {
        double time_s;
        double value;
    };

    mutable std::shared_mutex mu_;
    std::vector<LogRecord> logs_;
    std::map<int, std::vector<Point>> rsrp_;
    std::vector<Point> fps_;
};

}  // namespace netanalyzer::telemetry
