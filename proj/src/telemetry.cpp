#include "netanalyzer/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "netanalyzer/error.hpp"

namespace netanalyzer::telemetry {

using nlohmann::json;
using events::EventKind;

namespace {

void reject_unknown_keys(const json& doc, std::initializer_list<std::string_view> known) {
    if (!doc.is_object()) throw InvalidQuery("params: expected an object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw InvalidQuery(it.key() + ": unknown field");
    }
}

double number_field(const json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end()) throw InvalidQuery(std::string(key) + ": missing");
    if (!it->is_number()) throw InvalidQuery(std::string(key) + ": expected a number");
    double v = it->get<double>();
    if (!std::isfinite(v)) throw InvalidQuery(std::string(key) + ": not finite");
    return v;
}

std::optional<int> optional_int_field(const json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return std::nullopt;
    if (!it->is_number_integer()) throw InvalidQuery(std::string(key) + ": expected an integer");
    return it->get<int>();
}

std::string describe(const events::NormalizedEvent& e) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << "ue " << e.ue_id << ' ';
    switch (e.kind) {
    case EventKind::A3Trigger:
        os << "A3 entering condition met for " << e.target_cell << " over " << e.source_cell;
        if (e.rsrp_serving_dbm && e.rsrp_neighbor_dbm)
            os << " (serving " << *e.rsrp_serving_dbm << " dBm, neighbor " << *e.rsrp_neighbor_dbm
               << " dBm)";
        break;
    case EventKind::HoAttempt:
        os << "handover preparation " << e.source_cell << " -> " << e.target_cell;
        break;
    case EventKind::HoSuccess:
        os << "handover complete " << e.source_cell << " -> " << e.target_cell;
        break;
    case EventKind::HoFailure:
        os << "handover failed " << e.source_cell << " -> " << e.target_cell;
        break;
    }
    return os.str();
}

}  // namespace

json to_json(const LogRecord& r) {
    json doc = {
        {"event_id", r.event_id},
        {"time_s", r.time_s},
        {"ue_id", r.ue_id},
        {"kind", events::to_string(r.kind)},
        {"source_cell", r.source_cell},
        {"target_cell", r.target_cell},
        {"detail", r.detail},
    };
    if (r.trigger_margin_db) doc["trigger_margin_db"] = *r.trigger_margin_db;
    return doc;
}

LogRecord log_record_from_json(const json& doc) {
    LogRecord r;
    try {
        r.event_id = doc.value("event_id", std::string{});
        r.time_s = doc.at("time_s").get<double>();
        r.ue_id = doc.at("ue_id").get<int>();
        auto kind = events::event_kind_from_string(doc.at("kind").get<std::string>());
        if (!kind) throw InvalidQuery("kind");
        r.kind = *kind;
        r.source_cell = doc.at("source_cell").get<int>();
        r.target_cell = doc.at("target_cell").get<int>();
        r.detail = doc.value("detail", std::string{});
        if (auto it = doc.find("trigger_margin_db"); it != doc.end() && !it->is_null())
            r.trigger_margin_db = it->get<double>();
    } catch (const json::exception& e) {
        throw InvalidQuery(std::string("log record: ") + e.what());
    }
    return r;
}

LogRecord log_record_from_event(const events::NormalizedEvent& e) {
    LogRecord r;
    r.event_id = e.event_id;
    r.time_s = e.time_s;
    r.ue_id = e.ue_id;
    r.kind = e.kind;
    r.source_cell = e.source_cell;
    r.target_cell = e.target_cell;
    r.trigger_margin_db = e.trigger_margin_db;
    r.detail = describe(e);
    return r;
}

void LogQuery::validate() const {
    if (!std::isfinite(from_s) || !std::isfinite(to_s)) throw InvalidQuery("time_range");
    if (from_s > to_s) throw InvalidQuery("time_range");
    if (limit < 1 || limit > kMaxLogLimit) throw InvalidQuery("limit");
    if (kinds && kinds->empty()) throw InvalidQuery("kinds");
}

bool LogQuery::matches(const LogRecord& r) const {
    if (ue_id && r.ue_id != *ue_id) return false;
    if (r.time_s < from_s || r.time_s > to_s) return false;
    if (kinds && !kinds->contains(r.kind)) return false;
    return true;
}

json to_json(const LogQuery& q) {
    json doc = {{"from_s", q.from_s}, {"to_s", q.to_s}, {"limit", q.limit}};
    if (q.ue_id) doc["ue_id"] = *q.ue_id;
    if (q.kinds) {
        json kinds = json::array();
        for (auto k : *q.kinds) kinds.push_back(events::to_string(k));
        doc["kinds"] = kinds;
    }
    return doc;
}

LogQuery log_query_from_json(const json& doc) {
    reject_unknown_keys(doc, {"ue_id", "from_s", "to_s", "kinds", "limit"});
    LogQuery q;
    q.ue_id = optional_int_field(doc, "ue_id");
    q.from_s = number_field(doc, "from_s");
    q.to_s = number_field(doc, "to_s");
    if (auto it = doc.find("limit"); it != doc.end()) {
        if (!it->is_number_integer() || it->get<std::int64_t>() < 1 ||
            it->get<std::int64_t>() > static_cast<std::int64_t>(kMaxLogLimit))
            throw InvalidQuery("limit");
        q.limit = it->get<std::size_t>();
    }
    if (auto it = doc.find("kinds"); it != doc.end() && !it->is_null()) {
        if (!it->is_array()) throw InvalidQuery("kinds");
        std::set<EventKind> kinds;
        for (const auto& k : *it) {
            if (!k.is_string()) throw InvalidQuery("kinds");
            auto kind = events::event_kind_from_string(k.get<std::string>());
            if (!kind) throw InvalidQuery("kinds");
            kinds.insert(*kind);
        }
        q.kinds = std::move(kinds);
    }
    q.validate();
    return q;
}

json to_json(const LogResult& result) {
    json records = json::array();
    for (const auto& r : result.records) records.push_back(to_json(r));
    return {{"records", records}, {"truncated", result.truncated}};
}

std::string_view to_string(Series series) { return series == Series::Rsrp ? "RSRP" : "FPS"; }

Series series_from_string(std::string_view name) {
    if (name == "RSRP") return Series::Rsrp;
    if (name == "FPS") return Series::Fps;
    throw UnknownSeries(std::string(name));
}

std::size_t MetricQuery::max_points() const {
    return static_cast<std::size_t>(std::floor((to_s - from_s) / downsample_s + 1e-9)) + 1;
}

void MetricQuery::validate() const {
    if (!std::isfinite(from_s) || !std::isfinite(to_s) || from_s > to_s)
        throw InvalidQuery("time_range");
    if (!std::isfinite(downsample_s) || downsample_s < kMinDownsampleS - 1e-12)
        throw InvalidQuery("downsample_s");
    if (series == Series::Rsrp && !cell_id) throw InvalidQuery("cell_id");
    if (max_points() > kMaxMetricPoints) throw InvalidQuery("downsample_s");
}

json to_json(const MetricQuery& q) {
    json doc = {{"series", to_string(q.series)},
                {"from_s", q.from_s},
                {"to_s", q.to_s},
                {"downsample_s", q.downsample_s}};
    if (q.cell_id) doc["cell_id"] = *q.cell_id;
    return doc;
}

MetricQuery metric_query_from_json(const json& doc) {
    reject_unknown_keys(doc, {"series", "cell_id", "from_s", "to_s", "downsample_s"});
    MetricQuery q;
    auto series = doc.find("series");
    if (series == doc.end() || !series->is_string()) throw InvalidQuery("series");
    q.series = series_from_string(series->get<std::string>());
    q.cell_id = optional_int_field(doc, "cell_id");
    q.from_s = number_field(doc, "from_s");
    q.to_s = number_field(doc, "to_s");
    if (doc.contains("downsample_s")) q.downsample_s = number_field(doc, "downsample_s");
    q.validate();
    return q;
}

json to_json(const std::vector<MetricPoint>& points) {
    json out = json::array();
    for (const auto& p : points) out.push_back({{"time_s", p.time_s}, {"value", p.value}});
    return out;
}

void TelemetryStore::append_log(LogRecord record) {
    if (record.detail.size() > kMaxDetailBytes) record.detail.resize(kMaxDetailBytes);
    std::unique_lock lock(mu_);
    // Stable time order: equal timestamps keep arrival order.
    auto pos = std::upper_bound(logs_.begin(), logs_.end(), record.time_s,
                                [](double t, const LogRecord& r) { return t < r.time_s; });
    logs_.insert(pos, std::move(record));
}

void TelemetryStore::append_rsrp(const ran::RadioSample& sample) {
    std::unique_lock lock(mu_);
    for (const auto& [cell, dbm] : sample.rsrp_dbm) rsrp_[cell].push_back({sample.time_s, dbm});
}

void TelemetryStore::append_fps(const ran::FpsTrace& trace) {
    std::unique_lock lock(mu_);
    for (const auto& s : trace.samples) fps_.push_back({static_cast<double>(s.second_index), s.fps});
}

void TelemetryStore::ingest_scenario(const ran::ScenarioOutput& output) {
    for (const auto& e : output.events) append_log(log_record_from_event(e));
    for (const auto& s : output.radio) append_rsrp(s);
    append_fps(output.fps);
}

LogResult TelemetryStore::query_logs(const LogQuery& q) const {
    q.validate();
    std::shared_lock lock(mu_);
    LogResult result;
    auto it = std::lower_bound(logs_.begin(), logs_.end(), q.from_s,
                               [](const LogRecord& r, double t) { return r.time_s < t; });
    for (; it != logs_.end() && it->time_s <= q.to_s; ++it) {
        if (!q.matches(*it)) continue;
        if (result.records.size() == q.limit) {
            result.truncated = true;
            break;
        }
        result.records.push_back(*it);
    }
    return result;
}

std::vector<MetricPoint> TelemetryStore::query_metrics(const MetricQuery& q) const {
    q.validate();
    std::shared_lock lock(mu_);
    const std::vector<Point>* series = &fps_;
    if (q.series == Series::Rsrp) {
        auto it = rsrp_.find(*q.cell_id);
        if (it == rsrp_.end()) throw UnknownSeries("RSRP/" + std::to_string(*q.cell_id));
        series = &it->second;
    }

    std::map<std::size_t, std::pair<double, std::size_t>> buckets;
    for (const auto& p : *series) {
        if (p.time_s < q.from_s || p.time_s > q.to_s) continue;
        auto k = static_cast<std::size_t>(std::floor((p.time_s - q.from_s) / q.downsample_s + 1e-9));
        auto& [sum, n] = buckets[k];
        sum += p.value;
        ++n;
    }
    std::vector<MetricPoint> out;
    out.reserve(buckets.size());
    for (const auto& [k, acc] : buckets)
        out.push_back({q.from_s + static_cast<double>(k) * q.downsample_s,
                       acc.first / static_cast<double>(acc.second)});
    return out;
}

std::size_t TelemetryStore::log_count() const {
    std::shared_lock lock(mu_);
    return logs_.size();
}

std::size_t TelemetryStore::point_count() const {
    std::shared_lock lock(mu_);
    std::size_t n = fps_.size();
    for (const auto& [cell, pts] : rsrp_) n += pts.size();
    return n;
}

std::string TelemetryStore::snapshot_ndjson() const {
    std::shared_lock lock(mu_);
    std::size_t points = fps_.size();
    for (const auto& [cell, pts] : rsrp_) points += pts.size();

    std::string out = json{{"store", "netanalyzer-telemetry"},
                           {"schema_version", events::kWireSchemaVersion},
                           {"logs", logs_.size()},
                           {"points", points}}
                          .dump();
    out += '\n';
    for (const auto& r : logs_) {
        json doc = to_json(r);
        doc["schema_version"] = events::kWireSchemaVersion;
        doc["record"] = "log";
        out += doc.dump();
        out += '\n';
    }
    for (const auto& [cell, pts] : rsrp_) {
        for (const auto& p : pts) {
            out += json{{"record", "rsrp"}, {"cell_id", cell}, {"time_s", p.time_s}, {"value", p.value}}
                       .dump();
            out += '\n';
        }
    }
    for (const auto& p : fps_) {
        out += json{{"record", "fps"}, {"time_s", p.time_s}, {"value", p.value}}.dump();
        out += '\n';
    }
    return out;
}

void TelemetryStore::load_snapshot(std::string_view ndjson) {
    std::istringstream in{std::string(ndjson)};
    std::string line;
    if (!std::getline(in, line)) throw InvalidQuery("snapshot: missing header");
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("store", "") != "netanalyzer-telemetry" ||
        header.value("schema_version", 0) != events::kWireSchemaVersion)
        throw InvalidQuery("snapshot: bad header");

    std::vector<LogRecord> logs;
    std::map<int, std::vector<Point>> rsrp;
    std::vector<Point> fps;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) throw InvalidQuery("snapshot: bad line");
        std::string kind = doc.value("record", "");
        if (kind == "log") {
            logs.push_back(log_record_from_json(doc));
        } else if (kind == "rsrp") {
            rsrp[doc.at("cell_id").get<int>()].push_back(
                {doc.at("time_s").get<double>(), doc.at("value").get<double>()});
        } else if (kind == "fps") {
            fps.push_back({doc.at("time_s").get<double>(), doc.at("value").get<double>()});
        } else {
            throw InvalidQuery("snapshot: unknown record type");
        }
    }
    if (logs.size() != header.value("logs", std::size_t{0})) throw InvalidQuery("snapshot: log count");

    for (auto& r : logs) append_log(std::move(r));
    std::unique_lock lock(mu_);
    for (auto& [cell, pts] : rsrp) {
        auto& dst = rsrp_[cell];
        dst.insert(dst.end(), pts.begin(), pts.end());
    }
    fps_.insert(fps_.end(), fps.begin(), fps.end());
}

}  // namespace netanalyzer::telemetry
