#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>

#include "netanalyzer/agents.hpp"
#include "netanalyzer/error.hpp"
#include "netanalyzer/rapp.hpp"
#include "netanalyzer/telemetry.hpp"

namespace netanalyzer::rapp {

using nlohmann::json;

std::string_view to_string(RunMode mode) {
    return mode == RunMode::Baseline ? "BASELINE" : "WITH_RAPP";
}

RunMode run_mode_from_string(std::string_view name) {
    std::string norm;
    for (char c : name) norm += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (norm == "BASELINE") return RunMode::Baseline;
    if (norm == "WITH_RAPP") return RunMode::WithRapp;
    throw InvalidConfig("mode: expected BASELINE or WITH_RAPP");
}

std::string_view to_string(RunStatus status) {
    return status == RunStatus::Completed ? "COMPLETED" : "AWAITING_APPROVAL";
}

double fps_variance(const ran::FpsTrace& trace, double from_s, double to_s) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& s : trace.samples) {
        if (s.second_index < from_s || s.second_index >= to_s) continue;
        sum += s.fps;
        sq += s.fps * s.fps;
        ++n;
    }
    if (n == 0) return 0.0;
    double mean = sum / static_cast<double>(n);
    return std::max(0.0, sq / static_cast<double>(n) - mean * mean);
}

const PhaseResult* RunReport::phase(std::string_view name) const {
    for (const auto& p : phases)
        if (p.name == name) return &p;
    return nullptr;
}

namespace {

json phase_json(const PhaseResult& p) {
    json a3 = json::object();
    for (const auto& [cell, cfg] : p.a3) a3[std::to_string(cell)] = ran::to_json(cfg);
    json hos = json::array();
    for (const auto& h : p.handovers) hos.push_back(ran::to_json(h));
    return {{"name", p.name},
            {"a3", a3},
            {"handovers", hos},
            {"ping_pongs_total", p.ping_pongs_total},
            {"ping_pongs_crossing", p.ping_pongs_crossing},
            {"fps_variance_crossing", p.fps_variance_crossing},
            {"fps", ran::to_json(p.fps)}};
}

// Audit record minus its wall-clock field.
json audit_json(const AuditRecord& r) {
    json j = to_json(r);
    j.erase("timestamp_ms");
    return j;
}

PhaseResult run_phase(const ScenarioSpec& spec, std::string name, const ran::SimulationSpec& sim,
                      ran::ScenarioOutput* keep = nullptr) {
    ran::ScenarioOutput out = ran::run_scenario(sim);
    PhaseResult p;
    p.name = std::move(name);
    for (const auto& c : sim.cells) p.a3[c.cell_id] = c.a3;
    p.handovers = out.handovers;
    p.fps = out.fps;
    p.ping_pongs_total = ran::count_ping_pongs(out.handovers, spec.ping_pong_window_s);
    auto crossing = ran::handovers_between(out.handovers, spec.crossing_interval_s[0],
                                           spec.crossing_interval_s[1]);
    p.ping_pongs_crossing = ran::count_ping_pongs(crossing, spec.ping_pong_window_s);
    p.fps_variance_crossing =
        fps_variance(out.fps, spec.crossing_interval_s[0], spec.crossing_interval_s[1]);
    if (keep) *keep = std::move(out);
    return p;
}

}  // namespace

json RunReport::report_section() const {
    json doc = {{"scenario_id", scenario_id},
                {"mode", to_string(mode)},
                {"status", to_string(status)},
                {"seed", seed},
                {"crossing_interval_s", {crossing_interval_s[0], crossing_interval_s[1]}}};
    json ph = json::array();
    for (const auto& p : phases) ph.push_back(phase_json(p));
    doc["phases"] = ph;
    json bs = json::array();
    for (const auto& b : batches) {
        json j = events::to_json(b);
        j.erase("created_at_ms");
        j.erase("last_ingest_ms");
        bs.push_back(j);
    }
    doc["batches"] = bs;
    json cs = json::array();
    for (const auto& c : cycles) cs.push_back(reasoning::to_json(c, false));
    doc["cycles"] = cs;
    json ps = json::array();
    for (const auto& p : proposals) ps.push_back(config::to_json(p, false));
    doc["proposals"] = ps;
    json vs = json::array();
    for (const auto& v : versions) vs.push_back({{"version", v.version}, {"proposal_id", v.proposal_id}});
    doc["versions"] = vs;
    doc["config_version"] = config_version;
    doc["config"] = config_export;
    json au = json::array();
    for (const auto& r : audit) au.push_back(audit_json(r));
    doc["audit"] = au;
    return doc;
}

json RunReport::to_json() const {
    json audit_ts = json::array();
    for (const auto& r : audit) audit_ts.push_back({{"seq", r.seq}, {"timestamp_ms", r.timestamp_ms}});
    json batch_ts = json::array();
    for (const auto& b : batches)
        batch_ts.push_back({{"batch_id", b.batch_id},
                            {"created_at_ms", b.created_at_ms},
                            {"last_ingest_ms", b.last_ingest_ms}});
    json version_ts = json::array();
    for (const auto& v : versions) version_ts.push_back({{"version", v.version}, {"at_ms", v.at_ms}});
    json cycles_ts = json::array();
    for (const auto& c : cycles) cycles_ts.push_back(reasoning::to_json(c, true));
    json proposals_ts = json::array();
    for (const auto& p : proposals) proposals_ts.push_back(config::to_json(p, true));
    return {{"report", report_section()},
            {"timestamps",
             {{"started_at_ms", started_at_ms},
              {"finished_at_ms", finished_at_ms},
              {"audit", audit_ts},
              {"batches", batch_ts},
              {"versions", version_ts},
              {"cycles", cycles_ts},
              {"proposals", proposals_ts}}}};
}

RunReport run_experiment(const ScenarioSpec& spec, const ExperimentOptions& options) {
    spec.validate();
    auto progress = [&](json doc) {
        if (options.on_progress) options.on_progress(doc);
    };

    RunReport report;
    report.scenario_id = spec.scenario_id;
    report.mode = options.mode;
    report.seed = spec.sim.seed;
    report.crossing_interval_s = spec.crossing_interval_s;
    report.started_at_ms = wall_clock_ms();

    // Everything inside the run is stamped by this clock, which follows the
    // replayed event times, so two runs of the same spec produce the same
    // audit trail.
    ManualClock clock;
    AuditLog audit(clock.as_clock());
    ran::SimulationSpec phase1 = spec.with_a3(spec.misconfigured);
    config::ConfigService config(phase1.cells, audit, clock.as_clock());
    telemetry::TelemetryStore telemetry;
    events::EventPipeline pipeline({}, &audit);
    reasoning::ToolGateway gateway(telemetry, config, audit);
    reasoning::Orchestrator orchestrator(gateway, config, audit, clock.as_clock(),
                                         {spec.iteration_cap, 2});
    config.set_apply_listener([&](const config::ApplyReport& r) {
        progress({{"event", "applied"}, {"proposal_id", r.proposal_id}, {"version", r.version}});
    });

    agents::RuleAgent default_agent;
    reasoning::Agent& agent = options.agent ? *options.agent : default_agent;

    ran::ScenarioOutput out;
    report.phases.push_back(run_phase(spec, "misconfigured", phase1, &out));
    progress({{"event", "phase"},
              {"name", "misconfigured"},
              {"ping_pongs_crossing", report.phases.back().ping_pongs_crossing}});

    if (options.mode == RunMode::WithRapp) {
        telemetry.ingest_scenario(out);
        std::vector<events::RawEvent> raws = ran::to_raw_events(out);
        for (auto& r : raws)
            r.received_at_ms = std::llround(r.payload.at("time_s").get<double>() * 1000.0 /
                                            spec.replay_speedup);
        std::stable_sort(raws.begin(), raws.end(), [](const auto& a, const auto& b) {
            return a.received_at_ms < b.received_at_ms;
        });

        std::deque<events::EventBatch> waiting;
        bool halted = false;

        // Starts queued batches in order until one would collide with a live
        // cycle. A cycle that parks without auto-approval halts the run.
        auto drain = [&] {
            while (!halted && !waiting.empty()) {
                if (orchestrator.conflicts(waiting.front().ue_ids())) return;
                std::string id = orchestrator.start_cycle(waiting.front(), agent);
                waiting.pop_front();
                reasoning::ReasoningCycle c = orchestrator.run(id);
                if (c.parked_for_human && options.auto_approve) {
                    c = orchestrator.resume_with_human_input(
                        id, reasoning::HumanInput::chat(std::string(kOperatorQuestion)));
                    if (c.parked_for_human)
                        c = orchestrator.resume_with_human_input(
                            id, reasoning::HumanInput::chat(std::string(kOperatorApproval)));
                }
                json trace = reasoning::mode_trace(c);
                progress({{"event", "cycle"}, {"cycle_id", id}, {"trace", trace}});
                if (options.on_cycle) options.on_cycle(c);
                if (c.parked_for_human) {
                    halted = true;
                    report.status = RunStatus::AwaitingApproval;
                }
            }
        };

        const std::int64_t tick = std::max<std::int64_t>(1, spec.batch_policy.quiescence_ms / 4);
        const std::int64_t end = (raws.empty() ? 0 : raws.back().received_at_ms) +
                                 2 * spec.batch_policy.quiescence_ms + tick;
        std::size_t next = 0;
        for (std::int64_t now = 0; now <= end && !halted; now += tick) {
            // Events land at their own arrival instants; batches are only cut
            // on the poll ticks in between.
            while (next < raws.size() && raws[next].received_at_ms <= now) {
                clock.set(raws[next].received_at_ms);
                pipeline.submit(raws[next], raws[next].received_at_ms);
                ++next;
            }
            clock.set(now);
            while (auto batch = pipeline.poll_batch(spec.batch_policy, now)) {
                progress({{"event", "batch"},
                          {"batch_id", batch->batch_id},
                          {"size", batch->events.size()}});
                waiting.push_back(std::move(*batch));
            }
            drain();
        }

        report.batches = pipeline.emitted_batches();
        report.cycles = orchestrator.cycles();

        if (report.status == RunStatus::Completed) {
            ran::SimulationSpec phase2 = spec.sim;
            for (auto& c : phase2.cells) c.a3 = config.a3_for_cell(c.cell_id);
            report.phases.push_back(run_phase(spec, "post_approval", phase2));
            progress({{"event", "phase"},
                      {"name", "post_approval"},
                      {"ping_pongs_crossing", report.phases.back().ping_pongs_crossing}});
        }
    }

    report.proposals = config.proposals();
    report.versions = config.version_history();
    report.config_version = config.version();
    report.config_export = config.export_json();
    report.audit = audit.records();
    report.finished_at_ms = wall_clock_ms();
    return report;
}

}  // namespace netanalyzer::rapp
