// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit code
// is the number of failures.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

#include "netanalyzer/error.hpp"
#include "netanalyzer/rapp.hpp"
#include "support/oracles.hpp"

using namespace netanalyzer;
using nlohmann::json;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

int failures = 0;

void criterion(int n, const char* title, double limit_s, const std::function<Outcome()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.ok = false;
        o.detail = std::string("exception: ") + e.what();
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s >= limit_s) o.require(false, "runtime " + std::to_string(s) + " s over limit");
    if (!o.ok) ++failures;
    std::printf("[%s] %d %s (%.3f s / %.0f s)%s%s\n", o.ok ? "PASS" : "FAIL", n, title, s, limit_s,
                o.detail.empty() ? "" : " -- ", o.detail.c_str());
    std::fflush(stdout);
}

std::vector<ran::FpsSample> window(const ran::FpsTrace& t, double from, double to) {
    std::vector<ran::FpsSample> out;
    for (const auto& s : t.samples)
        if (s.second_index >= from && s.second_index < to) out.push_back(s);
    return out;
}

double variance(const std::vector<ran::FpsSample>& v) {
    double m = 0;
    for (const auto& s : v) m += s.fps;
    m /= static_cast<double>(v.size());
    double acc = 0;
    for (const auto& s : v) acc += (s.fps - m) * (s.fps - m);
    return acc / static_cast<double>(v.size());
}

events::EventBatch single_ue_batch(int ue) {
    events::EventBatch b;
    b.batch_id = "b" + std::to_string(ue);
    events::NormalizedEvent e;
    e.event_id = b.batch_id + "/1";
    e.ue_id = ue;
    e.kind = events::EventKind::HoSuccess;
    e.source_cell = 30;
    e.target_cell = 31;
    b.events.push_back(e);
    return b;
}

class FnAgent final : public reasoning::Agent {
public:
    explicit FnAgent(std::function<reasoning::AgentOutput(const reasoning::AgentContext&)> f) : f_(std::move(f)) {}
    std::string name() const override { return "fuzz"; }
    reasoning::AgentOutput analyze(const reasoning::AgentContext& ctx) override { return f_(ctx); }

private:
    std::function<reasoning::AgentOutput(const reasoning::AgentContext&)> f_;
};

struct Rig {
    ManualClock clock{0};
    AuditLog audit{clock.as_clock()};
    config::ConfigService config{rapp::reference_scenario().with_a3({2.0, 2.0, 100}).cells, audit,
                                 clock.as_clock()};
    telemetry::TelemetryStore telemetry;
    reasoning::ToolGateway gateway{telemetry, config, audit};
    reasoning::Orchestrator orch{gateway, config, audit, clock.as_clock()};
};

bool gapless(const AuditLog& audit) {
    auto recs = audit.records();
    for (std::size_t i = 0; i < recs.size(); ++i)
        if (recs[i].seq != i + 1) return false;
    return true;
}

}  // namespace

int main() {
    const auto spec = rapp::reference_scenario();
    const double from = spec.crossing_interval_s[0], to = spec.crossing_interval_s[1];

    criterion(1, "ping-pong: misconfigured >= 4, corrected <= 1 in the crossing interval", 5.0, [&] {
        Outcome o;
        auto mis = ran::run_scenario(spec.with_a3({2.0, 2.0, 100}));
        auto cor = ran::run_scenario(spec.with_a3({4.0, 4.0, 320}));
        auto pm = ran::count_ping_pongs(ran::handovers_between(mis.handovers, from, to), 5.0);
        auto pc = ran::count_ping_pongs(ran::handovers_between(cor.handovers, from, to), 5.0);
        o.detail = "misconfigured " + std::to_string(pm) + ", corrected " + std::to_string(pc);
        o.require(pm >= 4 && pc <= 1, o.detail);
        return o;
    });

    criterion(2, "FPS: corrected variance < 25% of misconfigured, samples in [0, nominal]", 5.0, [&] {
        Outcome o;
        auto mis = ran::run_scenario(spec.with_a3({2.0, 2.0, 100}));
        auto cor = ran::run_scenario(spec.with_a3({4.0, 4.0, 320}));
        for (const auto* t : {&mis.fps, &cor.fps})
            for (const auto& s : t->samples) o.require(s.fps >= 0.0 && s.fps <= t->nominal_fps, "sample out of range");
        double vm = variance(window(mis.fps, from, to)), vc = variance(window(cor.fps, from, to));
        char buf[96];
        std::snprintf(buf, sizeof buf, "variance %.3f -> %.3f", vm, vc);
        o.require(vm > 0.0 && vc < 0.25 * vm, buf);
        if (o.ok) o.detail = buf;
        return o;
    });

    criterion(3, "reasoning trace, proposal and applied read-back on the reference scenario", 10.0, [&] {
        Outcome o;
        auto r = rapp::run_experiment(spec, {rapp::RunMode::WithRapp, true});
        o.require(r.cycles.size() == 1, "expected one cycle, got " + std::to_string(r.cycles.size()));
        if (!o.ok) return o;
        const auto& c = r.cycles[0];
        std::vector<std::string> want{"EVENT", "NEXT(LOG_QUERY)", "NEXT(CONFIG_GET)", "HUMAN(proposal)",
                                      "HUMAN(answer+await)", "STOP"};
        auto got = reasoning::mode_trace(c);
        std::string joined;
        for (const auto& s : got) joined += s + " ";
        o.require(got == want, "trace " + joined);
        o.require(r.proposals.size() == 1, "proposal count");
        if (!o.ok) return o;
        std::map<std::pair<int, config::Leaf>, std::pair<double, double>> entries;
        for (const auto& e : r.proposals[0].patch.entries) entries[{e.path.gnb_id, e.path.leaf}] = {e.expected_old, e.new_value};
        std::map<std::pair<int, config::Leaf>, std::pair<double, double>> expect;
        for (int g : {30, 31}) {
            expect[{g, config::Leaf::OffsetDb}] = {2.0, 4.0};
            expect[{g, config::Leaf::HysteresisDb}] = {2.0, 4.0};
            expect[{g, config::Leaf::TttMs}] = {100.0, 320.0};
        }
        o.require(r.proposals[0].patch.entries.size() == 6 && entries == expect, "proposal entries differ");
        o.require(r.proposals[0].status == config::ProposalStatus::Applied, "proposal not applied");
        bool read_back = false;
        for (const auto& t : c.human_turns) {
            if (!t.apply_report) continue;
            read_back = (*t.apply_report)["entries"].size() == 6;
            for (const auto& e : (*t.apply_report)["entries"])
                read_back = read_back && e["read_back"].is_number() && e["read_back"] == e["new"];
        }
        o.require(read_back, "no matching read-back");
        o.require(r.config_version == 1, "config version");
        o.detail = joined;
        return o;
    });

    criterion(4, "1000 adversarial agents stop or park within the iteration cap", 60.0, [&] {
        Outcome o;
        std::mt19937_64 rng(4);
        const std::vector<reasoning::ToolRequest> requests{
            {"CONFIG_GET", {{"path", "gnb/*"}}},
            {"CONFIG_GET", {{"path", "gnb/404"}}},
            {"LOG_QUERY", {{"from_s", 0}, {"to_s", 100}}},
            {"LOG_QUERY", {{"from_s", 0}, {"to_s", 100}, {"limit", 100000}}},
            {"METRIC_QUERY", {{"series", "FPS"}, {"from_s", 0}, {"to_s", 60}}},
            {"METRIC_QUERY", {{"series", "BOGUS"}}},
            {"shell", {{"cmd", "reboot"}}},
            {"CONFIG_SET", {{"path", "gnb/30"}, {"value", 0}}},
        };
        std::size_t parked = 0, stopped = 0;
        for (int k = 0; k < 1000; ++k) {
            Rig rig;
            int cap = static_cast<int>(rng() % 8);
            FnAgent agent([&](const reasoning::AgentContext&) -> reasoning::AgentOutput {
                using reasoning::ControlIntent;
                switch (rng() % 10) {
                case 0: throw std::runtime_error("malformed output");
                case 1: return {"", ControlIntent::stop("x")};
                case 2: return {"x", ControlIntent::ask_human("")};
                case 3: return {"x", ControlIntent{reasoning::IntentType::Continue, std::nullopt, "", std::nullopt}};
                case 4: return {"x", ControlIntent::ask_human("?")};
                case 5: return {"x", ControlIntent::stop("done")};
                default: return {"x", ControlIntent::continue_with(requests[rng() % requests.size()])};
                }
            });
            auto id = rig.orch.start_cycle(single_ue_batch(17), agent, cap);
            auto c = rig.orch.run(id);
            bool ok = (c.mode == reasoning::Mode::Stop || c.parked_for_human) &&
                      c.tool_dispatches <= static_cast<std::size_t>(cap) && reasoning::mode_grammar_ok(c);
            if (!ok) {
                o.require(false, "agent " + std::to_string(k) + " escaped the bounds");
                break;
            }
            c.parked_for_human ? ++parked : ++stopped;
        }
        if (o.ok) o.detail = std::to_string(stopped) + " stopped, " + std::to_string(parked) + " parked";
        return o;
    });

    criterion(5, "1000 fuzzed sessions: version == applied proposals, audit gapless", 60.0, [&] {
        Outcome o;
        std::mt19937_64 rng(5);
        const config::Leaf leaves[] = {config::Leaf::OffsetDb, config::Leaf::HysteresisDb, config::Leaf::TttMs};
        std::uint64_t total = 0;
        for (int k = 0; k < 1000 && o.ok; ++k) {
            Rig rig;
            std::uint64_t applied = 0;
            FnAgent agent([&](const reasoning::AgentContext& ctx) -> reasoning::AgentOutput {
                using reasoning::ControlIntent;
                if (ctx.pending_human && rng() % 2) return {"ok", ControlIntent::stop("done")};
                int gnb = rng() % 2 ? 30 : 31;
                auto leaf = leaves[rng() % 3];
                auto cur = rig.config.a3_for_cell(gnb);
                double old = leaf == config::Leaf::OffsetDb       ? cur.offset_db
                             : leaf == config::Leaf::HysteresisDb ? cur.hysteresis_db
                                                                  : cur.ttt_ms;
                if (rng() % 4 == 0) old += 1.0;  // stale
                double nv = leaf == config::Leaf::TttMs ? ran::kAllowedTttMs[rng() % ran::kAllowedTttMs.size()]
                                                        : 0.5 * static_cast<double>(rng() % 20);
                if (rng() % 8 == 0) nv = 0.3;  // invalid
                config::ConfigPatch patch{{{{gnb, 1, leaf}, old, nv}}};
                return {"propose", ControlIntent::ask_human("apply?", reasoning::ProposalDraft{patch, "fuzz"})};
            });
            std::string cycle;
            for (int op = 0; op < 12; ++op) {
                try {
                    switch (rng() % 5) {
                    case 0:
                        if (cycle.empty() || rig.orch.cycle(cycle).mode == reasoning::Mode::Stop) {
                            cycle = rig.orch.start_cycle(single_ue_batch(17), agent);
                            rig.orch.run(cycle);
                        }
                        break;
                    case 1:
                    case 2: {
                        if (cycle.empty()) break;
                        auto c = rig.orch.cycle(cycle);
                        if (!c.parked_for_human) break;
                        auto d = rng() % 3 ? config::Decision::Approve : config::Decision::Reject;
                        reasoning::HumanInput in = rng() % 2
                                                       ? reasoning::HumanInput::decide(c.pending_proposal_id, d)
                                                       : reasoning::HumanInput::chat(rng() % 2 ? "approve" : "why?");
                        auto after = rig.orch.resume_with_human_input(cycle, in);
                        if (after.human_turns.back().apply_report) ++applied;
                        break;
                    }
                    case 3: {
                        auto ps = rig.config.proposals();
                        if (ps.empty()) break;
                        rig.config.decide(ps[rng() % ps.size()].proposal_id,
                                          rng() % 2 ? config::Decision::Approve : config::Decision::Reject, "op");
                        break;
                    }
                    default: {
                        auto ps = rig.config.proposals();
                        if (ps.empty()) break;
                        rig.config.apply(ps[rng() % ps.size()].proposal_id);
                        ++applied;
                    }
                    }
                } catch (const Error&) {
                }
            }
            std::uint64_t approved_then_applied = 0;
            for (const auto& p : rig.config.proposals()) {
                bool approved = false, ok = false;
                for (const auto& t : p.transitions) {
                    if (t.status == config::ProposalStatus::Approved) approved = true;
                    if (t.status == config::ProposalStatus::Applied) ok = approved;
                }
                approved_then_applied += ok;
            }
            o.require(rig.config.version() == applied && applied == approved_then_applied,
                      "session " + std::to_string(k) + ": version " + std::to_string(rig.config.version()) +
                          ", applied " + std::to_string(applied) + ", approved+applied " +
                          std::to_string(approved_then_applied));
            o.require(gapless(rig.audit), "session " + std::to_string(k) + ": audit gap");
            total += applied;
        }
        if (o.ok) o.detail = std::to_string(total) + " proposals applied";
        return o;
    });

    criterion(6, "batching of 10000 random events: conservation, size, quiescence", 30.0, [&] {
        Outcome o;
        std::mt19937_64 rng(6);
        const events::BatchPolicy policy{250, 50};
        events::EventPipeline pipe;
        std::int64_t now = 0;
        std::set<std::string> in, out;
        std::int64_t last_ingest = -1;
        auto check = [&](const events::EventBatch& b, std::int64_t at) {
            o.require(!b.events.empty() && b.events.size() <= policy.max_count, "batch size");
            if (b.trigger_reason == events::TriggerReason::Quiescence)
                o.require(at - last_ingest >= policy.quiescence_ms, "early quiescence batch");
            else
                o.require(b.events.size() == policy.max_count, "short count batch");
            for (const auto& e : b.events) o.require(out.insert(e.event_id).second, "event emitted twice");
        };
        for (int i = 0; i < 10000; ++i) {
            // Bursty arrivals: mostly close together, now and then a long gap.
            now += rng() % 20 == 0 ? 200 + static_cast<std::int64_t>(rng() % 400) : static_cast<std::int64_t>(rng() % 30);
            while (auto b = pipe.poll_batch(policy, now)) check(*b, now);
            events::NormalizedEvent e;
            e.event_id = "e" + std::to_string(i);
            e.ue_id = 1 + static_cast<int>(rng() % 50);
            e.kind = events::EventKind::HoSuccess;
            e.source_cell = 30;
            e.target_cell = 31;
            pipe.ingest(e, now);
            last_ingest = now;
            in.insert(e.event_id);
        }
        now += policy.quiescence_ms;
        while (auto b = pipe.poll_batch(policy, now)) check(*b, now);
        o.require(pipe.depth() == 0, "events left behind");
        o.require(in == out, "conservation");
        if (o.ok) o.detail = std::to_string(pipe.emitted_batches().size()) + " batches";
        return o;
    });

    criterion(7, "evaluate_a3 matches the held-window scan on 200 random traces", 30.0, [&] {
        Outcome o;
        std::mt19937_64 rng(7);
        std::size_t triggers = 0;
        for (int k = 0; k < 200 && o.ok; ++k) {
            auto trace = oracle::random_trace(rng, 1 + rng() % 10000);
            auto cfg = oracle::random_a3(rng);
            auto got = ran::evaluate_a3(trace, 30, 31, cfg);
            auto want = oracle::a3_held_window(trace, 30, 31, cfg);
            bool same = got.size() == want.size();
            for (std::size_t i = 0; same && i < got.size(); ++i)
                same = got[i].time_s == want[i].time_s && got[i].trigger_margin_db == want[i].trigger_margin_db;
            o.require(same, "trace " + std::to_string(k) + " differs");
            triggers += want.size();
        }
        if (o.ok) o.detail = std::to_string(triggers) + " triggers compared";
        return o;
    });

    criterion(8, "two WITH_RAPP runs give byte-identical report sections", 10.0, [&] {
        Outcome o;
        auto a = rapp::run_experiment(spec, {rapp::RunMode::WithRapp, true}).report_section().dump();
        auto b = rapp::run_experiment(spec, {rapp::RunMode::WithRapp, true}).report_section().dump();
        o.require(a == b, "reports differ");
        if (o.ok) o.detail = std::to_string(a.size()) + " bytes";
        return o;
    });

    return failures;
}
