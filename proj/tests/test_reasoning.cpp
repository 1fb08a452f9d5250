#include <doctest.h>

#include <deque>
#include <functional>
#include <random>

#include "netanalyzer/error.hpp"
#include "netanalyzer/rapp.hpp"
#include "netanalyzer/reasoning.hpp"

using namespace netanalyzer;
using namespace netanalyzer::reasoning;
using nlohmann::json;

namespace {

using Script = std::function<AgentOutput(const AgentContext&)>;

class ScriptedAgent final : public Agent {
public:
    explicit ScriptedAgent(Script script) : script_(std::move(script)) {}
    std::string name() const override { return "scripted"; }
    AgentOutput analyze(const AgentContext& ctx) override {
        ++calls;
        return script_(ctx);
    }
    int calls = 0;

private:
    Script script_;
};

events::EventBatch batch_for(int ue, std::string id = "b1") {
    events::EventBatch b;
    b.batch_id = std::move(id);
    events::NormalizedEvent e;
    e.event_id = b.batch_id + "/e1";
    e.ue_id = ue;
    e.time_s = 30.0;
    e.kind = events::EventKind::HoSuccess;
    e.source_cell = 30;
    e.target_cell = 31;
    b.events.push_back(e);
    return b;
}

ToolRequest config_get(std::string path = "gnb/30/cell/1/a3/hysteresis-db") {
    return {"CONFIG_GET", {{"path", std::move(path)}}};
}

struct Rig {
    ManualClock clock{0};
    AuditLog audit{clock.as_clock()};
    config::ConfigService config{rapp::reference_scenario().with_a3({2.0, 2.0, 100}).cells, audit,
                                 clock.as_clock()};
    telemetry::TelemetryStore telemetry;
    ToolGateway gateway{telemetry, config, audit};
    Orchestrator orch;

    explicit Rig(OrchestratorOptions opts = {}) : orch(gateway, config, audit, clock.as_clock(), opts) {}
};

config::ConfigPatch corrected_patch() {
    config::ConfigPatch p;
    for (int gnb : {30, 31}) {
        p.entries.push_back({{gnb, 1, config::Leaf::OffsetDb}, 2.0, 4.0});
        p.entries.push_back({{gnb, 1, config::Leaf::HysteresisDb}, 2.0, 4.0});
        p.entries.push_back({{gnb, 1, config::Leaf::TttMs}, 100.0, 320.0});
    }
    return p;
}

}  // namespace

TEST_CASE("a normal batch stops after one step") {
    Rig rig;
    ScriptedAgent agent([](const AgentContext&) { return AgentOutput{"nothing unusual", ControlIntent::stop("ok")}; });
    auto id = rig.orch.start_cycle(batch_for(17), agent);
    auto c = rig.orch.run(id);
    CHECK(c.mode == Mode::Stop);
    CHECK(c.steps.size() == 1);
    CHECK(mode_trace(c) == std::vector<std::string>{"EVENT", "STOP"});
    CHECK(mode_grammar_ok(c));
    CHECK_THROWS_AS(rig.orch.step(id), CycleFinished);
}

TEST_CASE("an agent that always continues is cut off at the cap") {
    for (int cap : {0, 1, 5}) {
        Rig rig;
        ScriptedAgent agent(
            [](const AgentContext&) { return AgentOutput{"need more", ControlIntent::continue_with(config_get())}; });
        auto c = rig.orch.run(rig.orch.start_cycle(batch_for(17), agent, cap));
        CHECK(c.mode == Mode::Stop);
        CHECK(c.tool_dispatches == static_cast<std::size_t>(cap));
        CHECK(c.steps.size() == static_cast<std::size_t>(cap) + 1);
        CHECK(c.steps.back().forced);
        CHECK(c.steps.back().label == "STOP(cap)");
        REQUIRE(c.steps.back().overridden_intent);
        CHECK(c.steps.back().overridden_intent->type == IntentType::Continue);
        CHECK(mode_grammar_ok(c));
    }
}

TEST_CASE("negative cap is rejected") {
    Rig rig;
    ScriptedAgent agent([](const AgentContext&) { return AgentOutput{"x", ControlIntent::stop("x")}; });
    CHECK_THROWS_AS(rig.orch.start_cycle(batch_for(17), agent, -1), InvalidConfig);
}

TEST_CASE("CONFIG_GET reads through the gateway") {
    Rig rig;
    ScriptedAgent agent([](const AgentContext& ctx) {
        if (ctx.steps.empty()) return AgentOutput{"check", ControlIntent::continue_with(config_get())};
        return AgentOutput{"done", ControlIntent::stop("read")};
    });
    auto c = rig.orch.run(rig.orch.start_cycle(batch_for(17), agent));
    REQUIRE(c.steps.size() == 2);
    REQUIRE(c.steps[0].tool_result);
    CHECK(c.steps[0].tool_result->status == ToolStatus::Ok);
    CHECK(c.steps[0].tool_result->payload["entries"][0]["value"] == 2.0);
    CHECK(c.steps[0].label == "NEXT(CONFIG_GET)");
}

TEST_CASE("the gateway refuses tools outside the whitelist") {
    Rig rig;
    auto r = rig.gateway.dispatch({"shell", {{"cmd", "reboot"}}}, "cycle-x");
    CHECK(r.status == ToolStatus::GateRejected);
    CHECK(r.error.rfind("GateRejected", 0) == 0);
    auto bad = rig.gateway.dispatch({"LOG_QUERY", {{"from_s", 0}, {"to_s", 1}, {"limit", 9999}}}, "cycle-x");
    CHECK(bad.status == ToolStatus::GateRejected);
    auto missing = rig.gateway.dispatch({"METRIC_QUERY", {{"series", "RSRP"}, {"cell_id", 30}, {"from_s", 0}, {"to_s", 1}}},
                                        "cycle-x");
    CHECK(missing.status == ToolStatus::Error);
    CHECK(rig.audit.records().back().action == AuditAction::ToolDispatch);
    CHECK_THROWS_AS(control_intent_from_json({{"type", "CONTINUE"}, {"request", {{"tool", "shell"}, {"params", json::object()}}}}),
                    ParseFailure);
}

TEST_CASE("stop at iteration zero") {
    Rig rig;
    ScriptedAgent agent([](const AgentContext&) { return AgentOutput{"fine", ControlIntent::stop("fine")}; });
    auto c = rig.orch.run(rig.orch.start_cycle(batch_for(17), agent, 0));
    CHECK(c.tool_dispatches == 0);
    CHECK(c.mode == Mode::Stop);
    CHECK_FALSE(c.steps.back().forced);
}

TEST_CASE("proposal, question, approval") {
    Rig rig;
    ScriptedAgent agent([](const AgentContext& ctx) {
        if (ctx.pending_human) {
            const auto& h = *ctx.pending_human;
            if (!h.outcome.empty()) return AgentOutput{"applied", ControlIntent::stop("outcome " + h.outcome)};
            return AgentOutput{"answer", ControlIntent::ask_human("Thresholds go up; approve?")};
        }
        return AgentOutput{"propose", ControlIntent::ask_human("Approve?", ProposalDraft{corrected_patch(), "pp"})};
    });
    auto id = rig.orch.start_cycle(batch_for(17), agent);
    auto c = rig.orch.run(id);
    CHECK(c.parked_for_human);
    REQUIRE_FALSE(c.pending_proposal_id.empty());
    CHECK(rig.orch.latest_parked_cycle() == id);
    CHECK(rig.orch.cycle_for_proposal(c.pending_proposal_id) == id);
    CHECK_THROWS_AS(rig.orch.step(id), CycleParked);

    c = rig.orch.resume_with_human_input(id, HumanInput::chat("why these values?"));
    CHECK(c.steps.back().label == "HUMAN(answer+await)");
    CHECK(c.human_turns.back().after_step == 1);
    CHECK(rig.config.version() == 0);

    auto pid = c.pending_proposal_id;
    c = rig.orch.resume_with_human_input(id, HumanInput::decide(pid, config::Decision::Approve));
    CHECK(c.mode == Mode::Stop);
    CHECK(c.human_turns.back().outcome == "APPLIED");
    CHECK(rig.config.version() == 1);
    CHECK(mode_trace(c) ==
          std::vector<std::string>{"EVENT", "HUMAN(proposal)", "HUMAN(answer+await)", "STOP"});
    CHECK(mode_grammar_ok(c));
    CHECK_THROWS_AS(rig.orch.resume_with_human_input(id, HumanInput::chat("hi")), NotParked);
}

TEST_CASE("rejection leaves the configuration untouched") {
    Rig rig;
    ScriptedAgent agent([](const AgentContext& ctx) {
        if (ctx.pending_human) return AgentOutput{"ok", ControlIntent::stop("outcome " + ctx.pending_human->outcome)};
        return AgentOutput{"propose", ControlIntent::ask_human("Approve?", ProposalDraft{corrected_patch(), "pp"})};
    });
    auto id = rig.orch.start_cycle(batch_for(17), agent);
    auto c = rig.orch.run(id);
    c = rig.orch.resume_with_human_input(id, HumanInput::decide(c.pending_proposal_id, config::Decision::Reject));
    CHECK(c.mode == Mode::Stop);
    CHECK(c.human_turns.back().outcome == "REJECTED");
    CHECK(rig.config.version() == 0);
}

TEST_CASE("continuing after HUMAN is a protocol error that escalates") {
    Rig rig;
    ScriptedAgent agent([](const AgentContext& ctx) {
        if (ctx.pending_human) return AgentOutput{"more", ControlIntent::continue_with(config_get())};
        return AgentOutput{"ask", ControlIntent::ask_human("which UE?")};
    });
    auto id = rig.orch.start_cycle(batch_for(17), agent);
    rig.orch.run(id);
    auto c = rig.orch.resume_with_human_input(id, HumanInput::chat("17"));
    CHECK(c.parked_for_human);
    CHECK(c.steps.back().label == "HUMAN(escalation)");
    CHECK(c.steps.back().rejected_attempts.size() == 3);
    CHECK(c.tool_dispatches == 0);
}

TEST_CASE("concurrent cycles must not share a UE") {
    Rig rig;
    ScriptedAgent agent([](const AgentContext&) { return AgentOutput{"ask", ControlIntent::ask_human("?")}; });
    auto a = rig.orch.start_cycle(batch_for(17, "a"), agent);
    rig.orch.run(a);
    CHECK(rig.orch.conflicts({17}));
    CHECK_THROWS_AS(rig.orch.start_cycle(batch_for(17, "b"), agent), CycleConflict);
    CHECK_NOTHROW(rig.orch.start_cycle(batch_for(18, "c"), agent));
}

TEST_CASE("adversarial agents always terminate or park within the cap") {
    std::mt19937_64 rng(99);
    const std::vector<ToolRequest> requests{
        config_get(),
        config_get("gnb/*"),
        config_get("gnb/77"),
        {"LOG_QUERY", {{"from_s", 0}, {"to_s", 100}, {"limit", 10}}},
        {"LOG_QUERY", {{"from_s", 5}, {"to_s", 1}}},
        {"METRIC_QUERY", {{"series", "FPS"}, {"from_s", 0}, {"to_s", 10}}},
        {"shell", {{"cmd", "rm -rf /"}}},
        {"CONFIG_SET", {{"path", "gnb/30"}}},
    };
    for (int k = 0; k < 300; ++k) {
        Rig rig;
        int cap = static_cast<int>(rng() % 7);
        ScriptedAgent agent([&](const AgentContext&) -> AgentOutput {
            switch (rng() % 9) {
            case 0: throw std::runtime_error("garbled");
            case 1: return {"", ControlIntent::stop("x")};
            case 2: return {"x", ControlIntent::stop("")};
            case 3: return {"x", ControlIntent::ask_human("")};
            case 4: {
                ControlIntent in;
                in.type = IntentType::Continue;
                return {"x", in};
            }
            case 5: return {"x", ControlIntent::ask_human("q")};
            case 6: return {"x", ControlIntent::stop("s")};
            default: return {"x", ControlIntent::continue_with(requests[rng() % requests.size()])};
            }
        });
        auto id = rig.orch.start_cycle(batch_for(17), agent, cap);
        auto c = rig.orch.run(id);
        for (int turn = 0; turn < 10 && c.parked_for_human; ++turn)
            c = rig.orch.resume_with_human_input(id, HumanInput::chat("go on"));
        CHECK((c.mode == Mode::Stop || c.parked_for_human));
        CHECK(c.tool_dispatches <= static_cast<std::size_t>(cap));
        CHECK(mode_grammar_ok(c));
        CHECK(rig.config.version() == 0);
        auto recs = rig.audit.records();
        for (std::size_t i = 0; i < recs.size(); ++i) REQUIRE(recs[i].seq == i + 1);
    }
}

TEST_CASE("mode grammar rejects out-of-order traces") {
    ReasoningCycle c;
    c.mode = Mode::Stop;
    ReasoningStep s;
    s.mode = Mode::Event;
    s.resulting_mode = Mode::Stop;
    c.steps.push_back(s);
    CHECK(mode_grammar_ok(c));
    ReasoningStep h;
    h.mode = Mode::Human;
    c.steps.push_back(h);
    ReasoningStep n;
    n.mode = Mode::Next;
    c.steps.push_back(n);
    CHECK_FALSE(mode_grammar_ok(c));
}

TEST_CASE("steps round trip through JSON") {
    Rig rig;
    ScriptedAgent agent([](const AgentContext& ctx) {
        if (ctx.steps.empty()) return AgentOutput{"check", ControlIntent::continue_with(config_get())};
        return AgentOutput{"done", ControlIntent::stop("read")};
    });
    auto c = rig.orch.run(rig.orch.start_cycle(batch_for(17), agent));
    for (const auto& s : c.steps) {
        auto back = reasoning_step_from_json(to_json(s));
        CHECK(back.label == s.label);
        CHECK(back.intent == s.intent);
        CHECK(back.tool_result_digest == s.tool_result_digest);
    }
    auto ndjson = export_trace_ndjson(c);
    CHECK(std::count(ndjson.begin(), ndjson.end(), '\n') == static_cast<long>(c.steps.size()));
}
