#include <doctest.h>

#include <random>

#include "netanalyzer/error.hpp"
#include "netanalyzer/rapp.hpp"
#include "netanalyzer/telemetry.hpp"
#include "support/oracles.hpp"

using namespace netanalyzer;
using namespace netanalyzer::telemetry;
using events::EventKind;

namespace {

LogRecord rec(double t, int ue, EventKind kind = EventKind::HoSuccess, std::string id = {}) {
    LogRecord r;
    r.time_s = t;
    r.ue_id = ue;
    r.kind = kind;
    r.source_cell = 30;
    r.target_cell = 31;
    r.event_id = id.empty() ? "r" + std::to_string(t) + "/" + std::to_string(ue) : std::move(id);
    return r;
}

const ran::ScenarioOutput& misconfigured_run() {
    static const ran::ScenarioOutput out = [] {
        auto spec = rapp::reference_scenario();
        return ran::run_scenario(spec.with_a3(spec.misconfigured));
    }();
    return out;
}

}  // namespace

TEST_CASE("a record is visible to the next query") {
    TelemetryStore store;
    store.append_log(rec(10.0, 17));
    auto r = store.query_logs({17, 0.0, 20.0, std::nullopt, 10});
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].time_s == 10.0);
    CHECK_FALSE(r.truncated);
}

TEST_CASE("limit truncates and says so") {
    TelemetryStore store;
    store.append_log(rec(1.0, 17));
    store.append_log(rec(2.0, 17));
    auto r = store.query_logs({17, 0.0, 20.0, std::nullopt, 1});
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].time_s == 1.0);
    CHECK(r.truncated);
    auto exact = store.query_logs({17, 0.0, 20.0, std::nullopt, 2});
    CHECK_FALSE(exact.truncated);
}

TEST_CASE("log filters agree with a linear scan") {
    std::mt19937_64 rng(5);
    TelemetryStore store;
    std::vector<LogRecord> all;
    const EventKind kinds[] = {EventKind::A3Trigger, EventKind::HoAttempt, EventKind::HoSuccess,
                               EventKind::HoFailure};
    for (int i = 0; i < 400; ++i) {
        auto r = rec((rng() % 1000) / 10.0, 1 + static_cast<int>(rng() % 4), kinds[rng() % 4],
                     "e" + std::to_string(i));
        all.push_back(r);
        store.append_log(r);
    }
    for (int k = 0; k < 100; ++k) {
        LogQuery q;
        if (rng() % 2) q.ue_id = 1 + static_cast<int>(rng() % 4);
        q.from_s = (rng() % 1000) / 10.0;
        q.to_s = q.from_s + (rng() % 400) / 10.0;
        if (rng() % 2) q.kinds = std::set<EventKind>{kinds[rng() % 4], kinds[rng() % 4]};
        q.limit = kMaxLogLimit;
        std::multiset<std::string> want;
        for (const auto& r : all)
            if ((!q.ue_id || r.ue_id == *q.ue_id) && r.time_s >= q.from_s && r.time_s <= q.to_s &&
                (!q.kinds || q.kinds->contains(r.kind)))
                want.insert(r.event_id);
        auto got = store.query_logs(q);
        std::multiset<std::string> ids;
        for (std::size_t i = 0; i < got.records.size(); ++i) {
            ids.insert(got.records[i].event_id);
            if (i) CHECK(got.records[i - 1].time_s <= got.records[i].time_s);
        }
        CHECK(ids == want);
    }
}

TEST_CASE("handover successes in the crossing interval match the simulator") {
    TelemetryStore store;
    store.ingest_scenario(misconfigured_run());
    LogQuery q{17, 25.0, 60.0, std::set<EventKind>{EventKind::HoSuccess}, kMaxLogLimit};
    auto r = store.query_logs(q);
    auto hos = ran::handovers_between(misconfigured_run().handovers, 25.0, 60.0);
    REQUIRE(r.records.size() == hos.size());
    for (std::size_t i = 0; i < hos.size(); ++i) {
        CHECK(r.records[i].source_cell == hos[i].source_cell);
        CHECK(r.records[i].target_cell == hos[i].target_cell);
    }
    CHECK(store.query_logs({17, 0.0, 0.0, std::nullopt, 10}).records.empty());
}

TEST_CASE("invalid log queries") {
    TelemetryStore store;
    CHECK_THROWS_WITH_AS(store.query_logs({17, 0.0, 1.0, std::nullopt, 501}), doctest::Contains("limit"),
                         InvalidQuery);
    CHECK_THROWS_AS(store.query_logs({17, 0.0, 1.0, std::nullopt, 0}), InvalidQuery);
    CHECK_THROWS_AS(store.query_logs({17, 2.0, 1.0, std::nullopt, 10}), InvalidQuery);
    CHECK_THROWS_AS(store.query_logs({17, 0.0, 1.0, std::set<EventKind>{}, 10}), InvalidQuery);
    CHECK_THROWS_AS(log_query_from_json({{"from_s", 0}, {"to_s", 1}, {"shell", "ls"}}), InvalidQuery);
    CHECK_THROWS_AS(log_query_from_json({{"from_s", "0"}, {"to_s", 1}}), InvalidQuery);
}

TEST_CASE("FPS points come back verbatim at one-second resolution") {
    TelemetryStore store;
    store.ingest_scenario(misconfigured_run());
    auto pts = store.query_metrics({Series::Fps, std::nullopt, 0.0, 74.0, 1.0});
    const auto& samples = misconfigured_run().fps.samples;
    REQUIRE(pts.size() == samples.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(pts[i].time_s == samples[i].second_index);
        CHECK(pts[i].value == samples[i].fps);
    }
}

TEST_CASE("RSRP is averaged per bucket") {
    TelemetryStore store;
    store.ingest_scenario(misconfigured_run());
    auto pts = store.query_metrics({Series::Rsrp, 30, 25.0, 26.0, 1.0});
    REQUIRE(pts.size() >= 1);
    std::vector<double> values;
    for (const auto& s : misconfigured_run().radio)
        if (s.time_s >= 25.0 - 1e-9 && s.time_s < 26.0 - 1e-9) values.push_back(s.rsrp_dbm.at(30));
    CHECK(values.size() == 100);
    CHECK(pts[0].time_s == 25.0);
    CHECK(pts[0].value == doctest::Approx(oracle::mean(values)).epsilon(1e-12));
}

TEST_CASE("metric query validation") {
    TelemetryStore store;
    store.ingest_scenario(misconfigured_run());
    CHECK_THROWS_AS(series_from_string("SINR"), UnknownSeries);
    CHECK(series_from_string("FPS") == Series::Fps);
    CHECK_THROWS_AS(store.query_metrics({Series::Rsrp, 99, 0.0, 1.0, 1.0}), UnknownSeries);
    CHECK_THROWS_AS(store.query_metrics({Series::Rsrp, std::nullopt, 0.0, 1.0, 1.0}), InvalidQuery);
    CHECK_THROWS_AS(store.query_metrics({Series::Fps, std::nullopt, 0.0, 1.0, 0.01}), InvalidQuery);
    CHECK_THROWS_AS(store.query_metrics({Series::Fps, std::nullopt, 0.0, 1000.0, 0.1}), InvalidQuery);
}

TEST_CASE("snapshot round trip") {
    TelemetryStore store;
    store.ingest_scenario(misconfigured_run());
    auto text = store.snapshot_ndjson();
    TelemetryStore copy;
    copy.load_snapshot(text);
    CHECK(copy.log_count() == store.log_count());
    CHECK(copy.point_count() == store.point_count());
    CHECK(copy.snapshot_ndjson() == text);
    TelemetryStore bad;
    CHECK_THROWS_AS(bad.load_snapshot("{\"store\":\"other\"}\n"), InvalidQuery);
}
