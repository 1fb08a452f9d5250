#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "netanalyzer/error.hpp"
#include "netanalyzer/rapp.hpp"

using namespace netanalyzer;
using namespace netanalyzer::rapp;
using nlohmann::json;

namespace {

const std::filesystem::path kReferenceFile =
    std::filesystem::path(NETANALYZER_SOURCE_DIR) / "scenarios" / "reference.json";

// Two-pass population variance, written independently of the library.
double variance(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("scenarios/reference.json is the built-in reference scenario") {
    auto file = load_scenario(kReferenceFile);
    CHECK(to_json(file) == to_json(reference_scenario()));
    CHECK(to_json(scenario_from_json(to_json(file))) == to_json(file));
}

TEST_CASE("scenario parsing is strict") {
    json doc = to_json(reference_scenario());
    doc["surprise"] = true;
    CHECK_THROWS_WITH_AS(scenario_from_json(doc), doctest::Contains("surprise"), InvalidScenario);
    doc = to_json(reference_scenario());
    doc["radio"].erase("path_loss_exponent");
    CHECK_THROWS_WITH_AS(scenario_from_json(doc), doctest::Contains("path_loss_exponent"), InvalidScenario);
    doc = to_json(reference_scenario());
    doc["seed"] = "42";
    CHECK_THROWS_AS(scenario_from_json(doc), InvalidScenario);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), InvalidScenario);
}

TEST_CASE("run modes parse loosely") {
    CHECK(run_mode_from_string("with-rapp") == RunMode::WithRapp);
    CHECK(run_mode_from_string("WITH_RAPP") == RunMode::WithRapp);
    CHECK(run_mode_from_string("baseline") == RunMode::Baseline);
    CHECK_THROWS_AS(run_mode_from_string("turbo"), InvalidConfig);
}

TEST_CASE("baseline runs only the misconfigured phase") {
    auto r = run_experiment(reference_scenario(), {RunMode::Baseline});
    CHECK(r.status == RunStatus::Completed);
    CHECK(r.cycles.empty());
    CHECK(r.config_version == 0);
    REQUIRE(r.phases.size() == 1);
    const auto* p = r.phase("misconfigured");
    REQUIRE(p);
    CHECK(p->ping_pongs_crossing >= 4);
}

TEST_CASE("with the rApp and approval, ping-pong and FPS variance drop") {
    auto r = run_experiment(reference_scenario(), {RunMode::WithRapp, true});
    CHECK(r.status == RunStatus::Completed);
    CHECK(r.config_version == 1);
    const auto* before = r.phase("misconfigured");
    const auto* after = r.phase("post_approval");
    REQUIRE(before);
    REQUIRE(after);
    CHECK(after->ping_pongs_crossing <= 1);
    for (const auto& [cell, a3] : after->a3) CHECK(a3 == ran::A3Config{4.0, 4.0, 320});

    std::vector<double> b, a;
    for (const auto& s : before->fps.samples)
        if (s.second_index >= 25 && s.second_index < 60) b.push_back(s.fps);
    for (const auto& s : after->fps.samples)
        if (s.second_index >= 25 && s.second_index < 60) a.push_back(s.fps);
    CHECK(before->fps_variance_crossing == doctest::Approx(variance(b)));
    CHECK(after->fps_variance_crossing == doctest::Approx(variance(a)));
    CHECK(variance(a) < 0.25 * variance(b));
}

TEST_CASE("without approval the run parks and nothing is applied") {
    auto r = run_experiment(reference_scenario(), {RunMode::WithRapp, false});
    CHECK(r.status == RunStatus::AwaitingApproval);
    CHECK(r.config_version == 0);
    CHECK(r.phase("post_approval") == nullptr);
    REQUIRE(r.proposals.size() == 1);
    CHECK(r.proposals[0].status == config::ProposalStatus::Pending);
}

TEST_CASE("report sections are reproducible") {
    auto a = run_experiment(reference_scenario(), {RunMode::WithRapp, true});
    auto b = run_experiment(reference_scenario(), {RunMode::WithRapp, true});
    CHECK(a.report_section().dump() == b.report_section().dump());
    auto doc = a.to_json();
    CHECK(doc.contains("report"));
    CHECK(doc.contains("timestamps"));
    for (const auto& rec : doc["report"]["audit"]) CHECK_FALSE(rec.contains("timestamp_ms"));
}

TEST_CASE("audit sequence is gapless across a full run") {
    auto r = run_experiment(reference_scenario(), {RunMode::WithRapp, true});
    REQUIRE_FALSE(r.audit.empty());
    for (std::size_t i = 0; i < r.audit.size(); ++i) CHECK(r.audit[i].seq == i + 1);
}

TEST_CASE("the diagnosis follows logs, then configuration, then the operator") {
    auto r = run_experiment(reference_scenario(), {RunMode::WithRapp, true});
    REQUIRE(r.cycles.size() == 1);
    const auto& first = r.cycles[0].steps.at(0).intent;
    REQUIRE(first.request);
    CHECK(first.request->tool == "LOG_QUERY");
    CHECK(first.request->params["ue_id"] == 17);
    CHECK(first.request->params["from_s"] == 25.0);
    CHECK(first.request->params["to_s"] == 60.0);

    std::vector<std::string> actions;
    for (const auto& a : r.audit) {
        if (a.action == AuditAction::EventIngest || a.action == AuditAction::BatchEmit) continue;
        actions.emplace_back(to_string(a.action));
    }
    CHECK(actions == std::vector<std::string>{"CYCLE_START", "TOOL_DISPATCH", "REASONING_STEP", "CONFIG_READ",
                                              "TOOL_DISPATCH", "REASONING_STEP", "PROPOSE", "REASONING_STEP",
                                              "HUMAN_INPUT", "REASONING_STEP", "HUMAN_INPUT", "DECIDE", "APPLY",
                                              "REASONING_STEP", "CYCLE_STOP"});
}
