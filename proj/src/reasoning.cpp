#include "netanalyzer/reasoning.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <regex>
#include <sstream>

#include "netanalyzer/digest.hpp"
#include "netanalyzer/error.hpp"

namespace netanalyzer::reasoning {

using nlohmann::json;

std::string_view to_string(Mode mode) {
    switch (mode) {
    case Mode::Event: return "EVENT";
    case Mode::Next: return "NEXT";
    case Mode::Human: return "HUMAN";
    case Mode::Stop: return "STOP";
    }
    return "STOP";
}

std::optional<Mode> mode_from_string(std::string_view name) {
    for (auto m : {Mode::Event, Mode::Next, Mode::Human, Mode::Stop})
        if (to_string(m) == name) return m;
    return std::nullopt;
}

bool is_whitelisted(std::string_view tool) {
    return std::find(kToolWhitelist.begin(), kToolWhitelist.end(), tool) != kToolWhitelist.end();
}

std::string_view to_string(IntentType type) {
    switch (type) {
    case IntentType::Continue: return "CONTINUE";
    case IntentType::AskHuman: return "ASK_HUMAN";
    case IntentType::Stop: return "STOP";
    }
    return "STOP";
}

ControlIntent ControlIntent::continue_with(ToolRequest request) {
    ControlIntent i;
    i.type = IntentType::Continue;
    i.request = std::move(request);
    return i;
}

ControlIntent ControlIntent::ask_human(std::string question, std::optional<ProposalDraft> draft) {
    ControlIntent i;
    i.type = IntentType::AskHuman;
    i.text = std::move(question);
    i.proposal = std::move(draft);
    return i;
}

ControlIntent ControlIntent::stop(std::string summary) {
    ControlIntent i;
    i.type = IntentType::Stop;
    i.text = std::move(summary);
    return i;
}

Mode resulting_mode(IntentType type) {
    switch (type) {
    case IntentType::Continue: return Mode::Next;
    case IntentType::AskHuman: return Mode::Human;
    case IntentType::Stop: return Mode::Stop;
    }
    return Mode::Stop;
}

json to_json(const ControlIntent& intent) {
    json doc = {{"type", to_string(intent.type)}};
    switch (intent.type) {
    case IntentType::Continue:
        if (intent.request) {
            doc["tool"] = intent.request->tool;
            doc["params"] = intent.request->params;
        }
        break;
    case IntentType::AskHuman:
        doc["question"] = intent.text;
        if (intent.proposal) {
            json p = config::to_json(intent.proposal->patch);
            p["rationale"] = intent.proposal->rationale;
            doc["proposal"] = p;
        }
        break;
    case IntentType::Stop: doc["summary"] = intent.text; break;
    }
    return doc;
}

namespace {

void require_keys(const json& doc, std::initializer_list<std::string_view> required,
                  std::initializer_list<std::string_view> optional, const char* where) {
    if (!doc.is_object()) throw ParseFailure(std::string(where) + ": expected an object");
    for (auto k : required)
        if (!doc.contains(std::string(k)))
            throw ParseFailure(std::string(where) + ": missing '" + std::string(k) + "'");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        bool known = std::find(required.begin(), required.end(), it.key()) != required.end() ||
                     std::find(optional.begin(), optional.end(), it.key()) != optional.end();
        if (!known) throw ParseFailure(std::string(where) + ": unknown key '" + it.key() + "'");
    }
}

std::string string_field(const json& doc, const char* key, const char* where) {
    const json& v = doc.at(key);
    if (!v.is_string()) throw ParseFailure(std::string(where) + "." + key + ": expected a string");
    return v.get<std::string>();
}

}  // namespace

ControlIntent control_intent_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string())
        throw ParseFailure("intent.type: missing");
    const std::string type = doc["type"].get<std::string>();
    if (type == "CONTINUE") {
        require_keys(doc, {"type", "tool", "params"}, {}, "intent");
        std::string tool = string_field(doc, "tool", "intent");
        if (!is_whitelisted(tool)) throw ParseFailure("intent.tool: '" + tool + "' not allowed");
        if (!doc["params"].is_object()) throw ParseFailure("intent.params: expected an object");
        return ControlIntent::continue_with({tool, doc["params"]});
    }
    if (type == "ASK_HUMAN") {
        require_keys(doc, {"type", "question"}, {"proposal"}, "intent");
        std::optional<ProposalDraft> draft;
        if (doc.contains("proposal")) {
            const json& p = doc["proposal"];
            require_keys(p, {"rationale", "entries"}, {}, "intent.proposal");
            ProposalDraft d;
            d.rationale = string_field(p, "rationale", "intent.proposal");
            try {
                d.patch = config::config_patch_from_json(json{{"entries", p["entries"]}});
            } catch (const InvalidPatch& e) {
                throw ParseFailure("intent.proposal: " + e.detail());
            }
            draft = std::move(d);
        }
        return ControlIntent::ask_human(string_field(doc, "question", "intent"), std::move(draft));
    }
    if (type == "STOP") {
        require_keys(doc, {"type", "summary"}, {}, "intent");
        return ControlIntent::stop(string_field(doc, "summary", "intent"));
    }
    throw ParseFailure("intent.type: '" + type + "' unknown");
}

std::string_view to_string(ToolStatus status) {
    switch (status) {
    case ToolStatus::Ok: return "OK";
    case ToolStatus::GateRejected: return "GATE_REJECTED";
    case ToolStatus::Error: return "ERROR";
    }
    return "ERROR";
}

json to_json(const ToolResult& r) {
    json doc = {{"tool", r.tool}, {"status", to_string(r.status)}, {"digest", r.digest}};
    if (r.status == ToolStatus::Ok)
        doc["payload"] = r.payload;
    else
        doc["error"] = r.error;
    return doc;
}

HumanInput HumanInput::chat(std::string text, std::string operator_id) {
    HumanInput in;
    in.kind = HumanInputKind::Text;
    in.text = std::move(text);
    in.operator_id = std::move(operator_id);
    return in;
}

HumanInput HumanInput::decide(std::string proposal_id, config::Decision decision,
                              std::string operator_id) {
    HumanInput in;
    in.kind = HumanInputKind::Decision;
    in.proposal_id = std::move(proposal_id);
    in.decision = decision;
    in.text = decision == config::Decision::Approve ? "approve" : "reject";
    in.operator_id = std::move(operator_id);
    return in;
}

json to_json(const HumanTurn& t, bool timestamps) {
    json doc = {{"after_step", t.after_step}, {"text", t.text}, {"operator", t.operator_id}};
    if (!t.proposal_id.empty()) doc["proposal_id"] = t.proposal_id;
    if (!t.outcome.empty()) doc["outcome"] = t.outcome;
    if (t.apply_report) doc["apply_report"] = *t.apply_report;
    if (timestamps) doc["timestamp_ms"] = t.timestamp_ms;
    return doc;
}

json to_json(const ReasoningStep& s, bool timestamps) {
    json doc = {
        {"index", s.index},
        {"mode", to_string(s.mode)},
        {"resulting_mode", to_string(s.resulting_mode)},
        {"label", s.label},
        {"actor", to_string(s.actor)},
        {"explanation", s.explanation},
        {"intent", to_json(s.intent)},
    };
    if (s.tool_result) {
        doc["tool_result"] = {{"tool", s.tool_result->tool},
                              {"status", to_string(s.tool_result->status)},
                              {"digest", s.tool_result->digest}};
        if (!s.tool_result->error.empty()) doc["tool_result"]["error"] = s.tool_result->error;
    }
    if (!s.tool_result_digest.empty()) doc["tool_result_digest"] = s.tool_result_digest;
    if (!s.proposal_id.empty()) doc["proposal_id"] = s.proposal_id;
    if (s.forced) {
        doc["forced"] = true;
        if (s.overridden_intent) doc["overridden_intent"] = to_json(*s.overridden_intent);
    }
    if (!s.rejected_attempts.empty()) doc["rejected_attempts"] = s.rejected_attempts;
    if (timestamps) doc["timestamp_ms"] = s.timestamp_ms;
    return doc;
}

ReasoningStep reasoning_step_from_json(const json& doc) {
    ReasoningStep s;
    try {
        s.index = doc.at("index").get<std::size_t>();
        auto mode = mode_from_string(doc.at("mode").get<std::string>());
        auto result = mode_from_string(doc.at("resulting_mode").get<std::string>());
        if (!mode || !result) throw ParseFailure("step.mode");
        s.mode = *mode;
        s.resulting_mode = *result;
        s.label = doc.at("label").get<std::string>();
        s.explanation = doc.at("explanation").get<std::string>();
        s.intent = control_intent_from_json(doc.at("intent"));
        s.actor = doc.at("actor").get<std::string>() == "ORCHESTRATOR" ? Actor::Orchestrator
                                                                     : Actor::Agent;
        s.tool_result_digest = doc.value("tool_result_digest", std::string{});
        s.proposal_id = doc.value("proposal_id", std::string{});
        s.forced = doc.value("forced", false);
        s.timestamp_ms = doc.value("timestamp_ms", std::int64_t{0});
    } catch (const json::exception& e) {
        throw ParseFailure(std::string("step: ") + e.what());
    }
    return s;
}

std::vector<std::string> mode_trace(const ReasoningCycle& cycle) {
    std::vector<std::string> trace{"EVENT"};
    for (const auto& s : cycle.steps) trace.push_back(s.label);
    return trace;
}

bool mode_grammar_ok(const ReasoningCycle& cycle) {
    std::string word;
    for (const auto& s : cycle.steps) word += to_string(s.mode).front();
    word += to_string(cycle.mode).front();
    // E: EVENT, N: NEXT, H: HUMAN, S: STOP.
    const std::regex grammar("EN{0," + std::to_string(std::max(cycle.cap, 0)) + "}H*(S|H)");
    if (!std::regex_match(word, grammar)) return false;
    if (word.back() == 'H' && !cycle.parked_for_human) return false;
    return true;
}

json to_json(const ReasoningCycle& c, bool timestamps) {
    json steps = json::array();
    for (const auto& s : c.steps) steps.push_back(to_json(s, timestamps));
    json turns = json::array();
    for (const auto& t : c.human_turns) turns.push_back(to_json(t, timestamps));
    return {
        {"cycle_id", c.cycle_id},
        {"batch_id", c.batch.batch_id},
        {"ue_ids", c.ue_key},
        {"agent", c.agent_name},
        {"cap", c.cap},
        {"iteration", c.iteration},
        {"tool_dispatches", c.tool_dispatches},
        {"mode", to_string(c.mode)},
        {"parked_for_human", c.parked_for_human},
        {"pending_proposal_id", c.pending_proposal_id},
        {"mode_trace", mode_trace(c)},
        {"steps", steps},
        {"human_turns", turns},
    };
}

std::string export_trace_ndjson(const ReasoningCycle& cycle) {
    std::string out;
    for (const auto& s : cycle.steps) {
        json doc = to_json(s);
        doc["cycle_id"] = cycle.cycle_id;
        out += doc.dump();
        out += '\n';
    }
    return out;
}

json batch_summary(const events::EventBatch& batch) {
    json per_ue = json::object();
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < batch.events.size(); ++i) {
        const auto& e = batch.events[i];
        json& counts = per_ue[std::to_string(e.ue_id)];
        if (counts.is_null()) counts = json::object();
        std::string kind(events::to_string(e.kind));
        counts[kind] = counts.value(kind, 0) + 1;
        if (i == 0 || e.time_s < first) first = e.time_s;
        if (i == 0 || e.time_s > last) last = e.time_s;
    }
    return {{"batch_id", batch.batch_id},
            {"events", batch.events.size()},
            {"trigger_reason", events::to_string(batch.trigger_reason)},
            {"time_span_s", {first, last}},
            {"per_ue", per_ue}};
}

namespace {

constexpr std::size_t kMaxRenderedEvents = 200;

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::string render_step(const ReasoningStep& s) {
    std::string out = "[" + std::to_string(s.index) + "] " + std::string(to_string(s.mode)) +
                      " -> " + s.label + "\n";
    out += "explanation: " + s.explanation + "\n";
    out += "intent: " + to_json(s.intent).dump() + "\n";
    if (!s.proposal_id.empty()) out += "proposal_id: " + s.proposal_id + "\n";
    if (s.tool_result) out += "result: " + to_json(*s.tool_result).dump() + "\n";
    return out;
}

std::string render_turn(const HumanTurn& t) {
    std::string out = "operator (after step " + std::to_string(t.after_step) + "): " + t.text + "\n";
    if (!t.outcome.empty()) out += "proposal " + t.proposal_id + " outcome: " + t.outcome + "\n";
    if (t.apply_report) out += "apply report: " + t.apply_report->dump() + "\n";
    return out;
}

}  // namespace

std::string render_context(const AgentContext& ctx) {
    std::string out;
    out += "## cycle\n";
    out += "cycle_id: " + ctx.cycle_id + "\n";
    out += "mode: " + std::string(to_string(ctx.mode)) + "\n";
    out += "iteration: " + std::to_string(ctx.iteration) + " of " + std::to_string(ctx.cap) + "\n";
    if (!ctx.pending_proposal_id.empty())
        out += "pending_proposal: " + ctx.pending_proposal_id + "\n";

    out += "## batch\n" + batch_summary(ctx.batch).dump() + "\n";
    out += "## events\n";
    std::size_t shown = std::min(ctx.batch.events.size(), kMaxRenderedEvents);
    for (std::size_t i = 0; i < shown; ++i) {
        const auto& e = ctx.batch.events[i];
        out += "t=" + fixed(e.time_s, 3) + " ue=" + std::to_string(e.ue_id) + " " +
               std::string(events::to_string(e.kind)) + " " + std::to_string(e.source_cell) +
               "->" + std::to_string(e.target_cell);
        if (e.trigger_margin_db) out += " margin_db=" + fixed(*e.trigger_margin_db, 2);
        out += "\n";
    }
    if (shown < ctx.batch.events.size())
        out += "(" + std::to_string(ctx.batch.events.size() - shown) + " more events omitted)\n";

    // Steps and operator turns interleaved, newest kept when over budget.
    std::vector<std::string> blocks;
    std::size_t turn = 0;
    for (const auto& s : ctx.steps) {
        while (turn < ctx.human_turns.size() && ctx.human_turns[turn].after_step < s.index)
            blocks.push_back(render_turn(ctx.human_turns[turn++]));
        blocks.push_back(render_step(s));
    }
    while (turn < ctx.human_turns.size()) blocks.push_back(render_turn(ctx.human_turns[turn++]));

    std::size_t used = 0, keep = 0;
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
        if (used + it->size() > kMaxRenderedStepChars) break;
        used += it->size();
        ++keep;
    }
    out += "## history\n";
    if (keep < blocks.size())
        out += "(" + std::to_string(blocks.size() - keep) + " earlier entries omitted)\n";
    for (std::size_t i = blocks.size() - keep; i < blocks.size(); ++i) out += blocks[i];

    if (ctx.pending_human) out += "## operator input\n" + render_turn(*ctx.pending_human);
    return out;
}

ToolResult ToolGateway::dispatch(const ToolRequest& request, const std::string& cycle_id) {
    ToolResult r;
    r.tool = request.tool;
    enum class Phase { Validate, Execute } phase = Phase::Validate;
    try {
        if (!is_whitelisted(request.tool))
            throw InvalidQuery("tool '" + request.tool + "' not in whitelist");
        if (request.tool == "LOG_QUERY") {
            auto q = telemetry::log_query_from_json(request.params);
            phase = Phase::Execute;
            r.payload = telemetry::to_json(telemetry_.query_logs(q));
        } else if (request.tool == "METRIC_QUERY") {
            auto q = telemetry::metric_query_from_json(request.params);
            phase = Phase::Execute;
            json points = telemetry::to_json(telemetry_.query_metrics(q));
            r.payload = {{"series", telemetry::to_string(q.series)}, {"points", points}};
            if (q.cell_id) r.payload["cell_id"] = *q.cell_id;
        } else {
            const json& p = request.params;
            if (!p.is_object() || p.size() != 1 || !p.contains("path") || !p["path"].is_string())
                throw InvalidQuery("params: expected {\"path\": string}");
            auto selector = p["path"].get<std::string>();
            config::PathSelector::parse(selector);
            phase = Phase::Execute;
            r.payload = config::to_json(config_.select(selector, Actor::Agent));
        }
        r.status = ToolStatus::Ok;
        r.digest = digest(r.payload);
    } catch (const Error& e) {
        r.status = phase == Phase::Validate ? ToolStatus::GateRejected : ToolStatus::Error;
        r.error = (r.status == ToolStatus::GateRejected ? "GateRejected: " : "") +
                  std::string(e.what());
        r.payload = nullptr;
        r.digest = digest_text(r.error);
    } catch (const json::exception& e) {
        r.status = ToolStatus::GateRejected;
        r.error = std::string("GateRejected: ") + e.what();
        r.digest = digest_text(r.error);
    }
    std::string outcome = r.status == ToolStatus::Ok             ? "ok"
                          : r.status == ToolStatus::GateRejected ? "GateRejected"
                                                                 : "error";
    audit_.append(Actor::Orchestrator, AuditAction::ToolDispatch, cycle_id + ":" + request.tool,
                  digest(json{{"tool", request.tool}, {"params", request.params}}), r.digest,
                  outcome);
    return r;
}

Orchestrator::Orchestrator(ToolGateway& gateway, config::ConfigService& config, AuditLog& audit,
                           Clock clock, OrchestratorOptions options)
    : gateway_(gateway), config_(config), audit_(audit), clock_(std::move(clock)),
      options_(options) {
    if (options_.cap < 0) throw InvalidConfig("cap");
    if (options_.retries < 0) throw InvalidConfig("retries");
}

bool Orchestrator::conflicts(const std::set<int>& ue_ids) const {
    std::lock_guard lock(registry_mu_);
    for (const auto& [id, st] : status_) {
        if (!st.active) continue;
        for (int ue : ue_ids)
            if (st.ue_key.contains(ue)) return true;
    }
    return false;
}

std::string Orchestrator::start_cycle(events::EventBatch batch, Agent& agent, std::optional<int> cap) {
    int c = cap.value_or(options_.cap);
    if (c < 0) throw InvalidConfig("cap");
    auto ues = batch.ue_ids();
    auto s = std::make_shared<Slot>();
    std::string id;
    {
        std::lock_guard lock(registry_mu_);
        for (const auto& [other, st] : status_) {
            if (!st.active) continue;
            for (int ue : ues)
                if (st.ue_key.contains(ue))
                    throw CycleConflict("ue " + std::to_string(ue) + " held by " + other);
        }
        id = "cycle-" + std::to_string(next_cycle_++);
        s->cycle.cycle_id = id;
        s->cycle.batch = std::move(batch);
        s->cycle.ue_key = ues;
        s->cycle.cap = c;
        s->cycle.agent_name = agent.name();
        s->agent = &agent;
        slots_.emplace(id, s);
        status_.emplace(id, Status{ues, true, false, {}});
        order_.push_back(id);
    }
    audit_.append(Actor::Orchestrator, AuditAction::CycleStart, id,
                  digest(events::to_json(s->cycle.batch)));
    return id;
}

std::shared_ptr<Orchestrator::Slot> Orchestrator::slot(const std::string& cycle_id) const {
    std::lock_guard lock(registry_mu_);
    auto it = slots_.find(cycle_id);
    if (it == slots_.end()) throw UnknownCycle(cycle_id);
    return it->second;
}

void Orchestrator::publish(const ReasoningCycle& c) {
    std::lock_guard lock(registry_mu_);
    auto& st = status_[c.cycle_id];
    st.active = c.mode != Mode::Stop;
    st.parked = c.parked_for_human;
    st.pending_proposal_id = c.pending_proposal_id;
}

ReasoningCycle Orchestrator::step(const std::string& cycle_id) {
    auto s = slot(cycle_id);
    std::lock_guard lock(s->mu);
    if (s->cycle.mode == Mode::Stop) throw CycleFinished(cycle_id);
    if (s->cycle.parked_for_human) throw CycleParked(cycle_id);
    step_locked(*s);
    return s->cycle;
}

ReasoningCycle Orchestrator::run(const std::string& cycle_id) {
    auto s = slot(cycle_id);
    std::lock_guard lock(s->mu);
    while (s->cycle.mode != Mode::Stop && !s->cycle.parked_for_human) step_locked(*s);
    return s->cycle;
}

namespace {

std::string trim(std::string_view text) {
    auto b = text.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(b, e - b + 1));
}

// "approve", "Approve.", "REJECT!" -> decision; anything else is free text.
std::optional<config::Decision> chat_decision(std::string_view text) {
    std::string t = trim(text);
    while (!t.empty() && (t.back() == '.' || t.back() == '!')) t.pop_back();
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (t == "approve") return config::Decision::Approve;
    if (t == "reject") return config::Decision::Reject;
    return std::nullopt;
}

}  // namespace

void Orchestrator::record_step(Slot& s, ReasoningStep step, const std::string& context_digest) {
    ReasoningCycle& c = s.cycle;
    step.index = c.steps.size() + 1;
    step.mode = c.mode;
    step.timestamp_ms = clock_();
    c.mode = step.resulting_mode;
    c.parked_for_human = c.mode == Mode::Human;
    c.steps.push_back(step);
    audit_.append(step.actor, AuditAction::ReasoningStep, c.cycle_id + "#" + std::to_string(step.index),
                  context_digest, digest(to_json(step, false)));
    if (c.mode == Mode::Stop)
        audit_.append(Actor::Orchestrator, AuditAction::CycleStop, c.cycle_id, {},
                      digest(json(mode_trace(c))));
    publish(c);
}

void Orchestrator::step_locked(Slot& s) {
    ReasoningCycle& c = s.cycle;

    AgentContext ctx;
    ctx.cycle_id = c.cycle_id;
    ctx.mode = c.mode;
    ctx.iteration = c.iteration;
    ctx.cap = c.cap;
    ctx.batch = c.batch;
    ctx.steps = c.steps;
    ctx.human_turns = c.human_turns;
    if (s.pending_human) ctx.human_turns.pop_back();
    ctx.pending_human = s.pending_human;
    ctx.pending_proposal_id = c.pending_proposal_id;
    const std::string context_digest = digest_text(render_context(ctx));

    ReasoningStep step;
    std::optional<AgentOutput> accepted;
    std::string proposal_id;
    for (int attempt = 0; attempt <= options_.retries && !accepted; ++attempt) {
        try {
            AgentOutput out = s.agent->analyze(ctx);
            if (trim(out.explanation).empty()) throw AgentProtocolError("empty explanation");
            const ControlIntent& in = out.intent;
            switch (in.type) {
            case IntentType::Continue:
                if (!in.request) throw AgentProtocolError("CONTINUE without a tool request");
                if (c.mode == Mode::Human)
                    throw AgentProtocolError("CONTINUE is not allowed after HUMAN mode");
                break;
            case IntentType::AskHuman:
                if (trim(in.text).empty() && !in.proposal)
                    throw AgentProtocolError("ASK_HUMAN without question or proposal");
                if (in.proposal) {
                    proposal_id = config_
                                      .propose(in.proposal->patch, in.proposal->rationale,
                                               c.cycle_id)
                                      .proposal_id;
                }
                break;
            case IntentType::Stop:
                if (trim(in.text).empty()) throw AgentProtocolError("STOP without summary");
                break;
            }
            accepted = std::move(out);
        } catch (const std::exception& e) {
            step.rejected_attempts.push_back(e.what());
        }
    }
    s.pending_human.reset();

    if (!accepted) {
        step.actor = Actor::Orchestrator;
        step.explanation = "Agent output rejected " + std::to_string(step.rejected_attempts.size()) +
                           " times (last: " + step.rejected_attempts.back() +
                           "); operator guidance required.";
        step.intent = ControlIntent::ask_human(
            "The analysis agent did not return a valid decision. How should this cycle proceed?");
        step.resulting_mode = Mode::Human;
        step.label = "HUMAN(escalation)";
        record_step(s, std::move(step), context_digest);
        return;
    }

    step.explanation = accepted->explanation;
    step.intent = accepted->intent;
    switch (step.intent.type) {
    case IntentType::Continue:
        if (c.iteration >= c.cap) {
            step.forced = true;
            step.overridden_intent = step.intent;
            step.intent = ControlIntent::stop("Iteration cap of " + std::to_string(c.cap) +
                                              " reached; reasoning cycle terminated.");
            step.resulting_mode = Mode::Stop;
            step.label = "STOP(cap)";
            break;
        }
        step.tool_result = gateway_.dispatch(*step.intent.request, c.cycle_id);
        step.tool_result_digest = step.tool_result->digest;
        ++c.iteration;
        ++c.tool_dispatches;
        step.resulting_mode = Mode::Next;
        step.label = "NEXT(" + step.intent.request->tool + ")";
        break;
    case IntentType::AskHuman:
        step.resulting_mode = Mode::Human;
        if (!proposal_id.empty()) {
            step.proposal_id = proposal_id;
            c.pending_proposal_id = proposal_id;
            step.label = "HUMAN(proposal)";
        } else if (!c.pending_proposal_id.empty()) {
            step.label = "HUMAN(answer+await)";
        } else {
            step.label = "HUMAN(question)";
        }
        break;
    case IntentType::Stop:
        step.resulting_mode = Mode::Stop;
        step.label = "STOP";
        break;
    }
    record_step(s, std::move(step), context_digest);
}

ReasoningCycle Orchestrator::resume_with_human_input(const std::string& cycle_id, HumanInput input) {
    auto s = slot(cycle_id);
    std::lock_guard lock(s->mu);
    ReasoningCycle& c = s->cycle;
    if (c.mode != Mode::Human || !c.parked_for_human) throw NotParked(cycle_id);

    HumanTurn turn;
    turn.after_step = c.steps.size();
    turn.text = input.text;
    turn.operator_id = input.operator_id;
    turn.timestamp_ms = clock_();

    std::optional<config::Decision> decision;
    std::string target = input.proposal_id;
    if (input.kind == HumanInputKind::Decision) {
        decision = input.decision;
    } else if (!c.pending_proposal_id.empty()) {
        decision = chat_decision(input.text);
        target = c.pending_proposal_id;
    }
    audit_.append(Actor::Operator, AuditAction::HumanInput, cycle_id,
                  digest_text(input.operator_id + "\n" + input.text));

    if (decision && !target.empty()) {
        turn.proposal_id = target;
        try {
            config_.decide(target, *decision, input.operator_id);
            if (*decision == config::Decision::Approve) {
                try {
                    turn.apply_report = config::to_json(config_.apply(target));
                } catch (const StaleValue&) {
                }
            }
        } catch (const Error&) {
            // Already decided elsewhere or unknown; the agent sees the status.
        }
        try {
            turn.outcome = std::string(config::to_string(config_.proposal(target).status));
        } catch (const UnknownProposal&) {
            turn.outcome = "UNKNOWN";
        }
        if (target == c.pending_proposal_id && turn.outcome != "PENDING") c.pending_proposal_id.clear();
    }

    c.human_turns.push_back(turn);
    s->pending_human = turn;
    c.parked_for_human = false;
    publish(c);
    step_locked(*s);
    return c;
}

ReasoningCycle Orchestrator::cycle(const std::string& cycle_id) const {
    auto s = slot(cycle_id);
    std::lock_guard lock(s->mu);
    return s->cycle;
}

std::vector<ReasoningCycle> Orchestrator::cycles() const {
    std::vector<std::shared_ptr<Slot>> list;
    {
        std::lock_guard lock(registry_mu_);
        for (const auto& id : order_) list.push_back(slots_.at(id));
    }
    std::vector<ReasoningCycle> out;
    for (auto& s : list) {
        std::lock_guard lock(s->mu);
        out.push_back(s->cycle);
    }
    return out;
}

std::optional<std::string> Orchestrator::cycle_for_proposal(const std::string& proposal_id) const {
    std::lock_guard lock(registry_mu_);
    for (const auto& [id, st] : status_)
        if (st.active && st.parked && st.pending_proposal_id == proposal_id) return id;
    return std::nullopt;
}

std::optional<std::string> Orchestrator::latest_parked_cycle() const {
    std::lock_guard lock(registry_mu_);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        const auto& st = status_.at(*it);
        if (st.active && st.parked) return *it;
    }
    return std::nullopt;
}

}  // namespace netanalyzer::reasoning
