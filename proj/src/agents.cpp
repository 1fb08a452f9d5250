#include "netanalyzer/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <httplib.h>

#include "netanalyzer/error.hpp"

namespace netanalyzer::agents {

using nlohmann::json;
using reasoning::ControlIntent;
using reasoning::IntentType;
using reasoning::ToolStatus;

int recommend_ttt(int ttt_ms) {
    if (!ran::is_allowed_ttt(ttt_ms)) throw InvalidConfig("ttt_ms");
    int target = 3 * ttt_ms;
    for (int v : ran::kAllowedTttMs)
        if (v > ttt_ms && v >= target) return v;
    return ran::kAllowedTttMs.back();
}

ran::A3Config recommend_a3(const ran::A3Config& cur) {
    cur.validate();
    ran::A3Config next;
    next.offset_db = std::min(ran::kMaxOffsetDb, std::max(2.0 * cur.offset_db, cur.offset_db + 1.0));
    next.hysteresis_db =
        std::min(ran::kMaxHysteresisDb, std::max(2.0 * cur.hysteresis_db, cur.hysteresis_db + 1.0));
    next.ttt_ms = recommend_ttt(cur.ttt_ms);
    return next;
}

void RuleAgentParams::validate() const {
    if (pp_count_threshold < 1) throw InvalidConfig("pp_count_threshold");
    if (!(pp_window_s > 0.0)) throw InvalidConfig("pp_window_s");
    if (!(marginal_db > 0.0)) throw InvalidConfig("marginal_db");
    if (!(window_quantum_s > 0.0)) throw InvalidConfig("window_quantum_s");
}

RuleAgent::RuleAgent(RuleAgentParams params) : params_(params) { params_.validate(); }

namespace {

std::string num(double v) {
    std::ostringstream os;
    if (v == std::floor(v))
        os << static_cast<long long>(v);
    else
        os << std::fixed << std::setprecision(1) << v;
    return os.str();
}

std::string fixed2(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

const reasoning::ToolResult* latest_ok(const AgentContext& ctx, std::string_view tool) {
    for (auto it = ctx.steps.rbegin(); it != ctx.steps.rend(); ++it)
        if (it->tool_result && it->tool_result->tool == tool &&
            it->tool_result->status == ToolStatus::Ok)
            return &*it->tool_result;
    return nullptr;
}

const reasoning::ProposalDraft* latest_draft(const AgentContext& ctx) {
    for (auto it = ctx.steps.rbegin(); it != ctx.steps.rend(); ++it)
        if (it->intent.proposal) return &*it->intent.proposal;
    return nullptr;
}

struct Detection {
    int ue_id = 0;
    std::size_t in_window = 0;
    std::vector<double> times;
};

// Per UE, the largest number of inter-cell HO_SUCCESS events inside any
// window of pp_window_s.
std::optional<Detection> detect(const events::EventBatch& batch, const RuleAgentParams& p) {
    std::map<int, std::vector<double>> per_ue;
    for (const auto& e : batch.events)
        if (e.kind == events::EventKind::HoSuccess && e.source_cell != e.target_cell)
            per_ue[e.ue_id].push_back(e.time_s);
    std::optional<Detection> best;
    for (auto& [ue, times] : per_ue) {
        std::sort(times.begin(), times.end());
        std::size_t most = 0;
        for (std::size_t i = 0, j = 0; i < times.size(); ++i) {
            while (times[i] - times[j] > p.pp_window_s) ++j;
            most = std::max(most, i - j + 1);
        }
        if (most >= p.pp_count_threshold && (!best || most > best->in_window))
            best = Detection{ue, most, times};
    }
    return best;
}

std::string describe_change(const config::PatchEntry& e) {
    std::string unit = e.path.leaf == config::Leaf::TttMs ? " ms" : " dB";
    std::string name = e.path.leaf == config::Leaf::OffsetDb       ? "A3 offset"
                       : e.path.leaf == config::Leaf::HysteresisDb ? "hysteresis"
                                                                   : "time-to-trigger";
    return name + " " + num(e.expected_old) + " -> " + num(e.new_value) + unit;
}

// Groups identical per-leaf changes across gNBs: "gNB-30, gNB-31: ...".
std::string describe_patch(const config::ConfigPatch& patch) {
    std::map<std::string, std::vector<int>> by_change;
    std::vector<std::string> order;
    for (const auto& e : patch.entries) {
        auto text = describe_change(e);
        if (!by_change.contains(text)) order.push_back(text);
        by_change[text].push_back(e.path.gnb_id);
    }
    std::string out;
    for (const auto& text : order) {
        out += "  - " + text + " on ";
        const auto& gnbs = by_change[text];
        for (std::size_t i = 0; i < gnbs.size(); ++i)
            out += (i ? ", gNB-" : "gNB-") + std::to_string(gnbs[i]);
        out += "\n";
    }
    return out;
}

std::string gnb_list(const config::ConfigPatch& patch) {
    std::vector<int> gnbs;
    for (const auto& e : patch.entries)
        if (std::find(gnbs.begin(), gnbs.end(), e.path.gnb_id) == gnbs.end())
            gnbs.push_back(e.path.gnb_id);
    std::string out;
    for (std::size_t i = 0; i < gnbs.size(); ++i)
        out += (i ? (i + 1 == gnbs.size() ? " and gNB-" : ", gNB-") : "gNB-") + std::to_string(gnbs[i]);
    return out;
}

AgentOutput answer_human(const AgentContext& ctx) {
    const auto& turn = *ctx.pending_human;
    if (turn.outcome == "APPLIED") {
        std::string version;
        if (turn.apply_report) version = std::to_string(turn.apply_report->value("version", 0));
        return {"Configuration update confirmed: proposal " + turn.proposal_id +
                    " was applied by the orchestrator after operator approval (config version " +
                    version + ", read-back verified). Handover behaviour should settle with the "
                              "less sensitive A3 settings.",
                ControlIntent::stop("Proposal " + turn.proposal_id +
                                    " applied; reasoning cycle closed.")};
    }
    if (turn.outcome == "REJECTED")
        return {"The operator rejected proposal " + turn.proposal_id +
                    "; the configuration is left unchanged.",
                ControlIntent::stop("Proposal " + turn.proposal_id +
                                    " rejected; no configuration change.")};
    if (!turn.outcome.empty() && turn.outcome != "PENDING")
        return {"Proposal " + turn.proposal_id + " ended in status " + turn.outcome +
                    "; no further automated action is taken.",
                ControlIntent::stop("Proposal " + turn.proposal_id + " is " + turn.outcome +
                                    "; cycle closed.")};

    const auto* draft = latest_draft(ctx);
    if (!draft || ctx.pending_proposal_id.empty())
        return {"No configuration change is pending in this cycle; nothing further to do.",
                ControlIntent::stop("No pending proposal; cycle closed.")};

    return {"Recommended values (" + gnb_list(draft->patch) + "):\n" + describe_patch(draft->patch) +
                "These make the A3 entering condition harder to meet and require it to hold "
                "longer, so short signal swings near the cell edge no longer trigger handovers.",
            ControlIntent::ask_human("Approve proposal " + ctx.pending_proposal_id +
                                     "? Reply 'approve' or 'reject'.")};
}

}  // namespace

AgentOutput RuleAgent::analyze(const AgentContext& ctx) {
    if (ctx.pending_human) return answer_human(ctx);
    if (ctx.mode == reasoning::Mode::Human)
        return {"Awaiting operator input; no automated action.",
                ControlIntent::stop("No operator input to act on.")};

    // Stage 3: configuration read back -> proposal.
    if (const auto* cfg = latest_ok(ctx, "CONFIG_GET")) {
        std::map<std::pair<int, int>, std::map<config::Leaf, double>> cells;
        for (const auto& e : cfg->payload.at("entries")) {
            auto path = config::ConfigPath::parse(e.at("path").get<std::string>());
            cells[{path.gnb_id, path.cell_index}][path.leaf] = e.at("value").get<double>();
        }
        config::ConfigPatch patch;
        std::string current;
        for (const auto& [key, leaves] : cells) {
            if (leaves.size() != 3) continue;
            ran::A3Config cur{leaves.at(config::Leaf::OffsetDb), leaves.at(config::Leaf::HysteresisDb),
                              static_cast<int>(std::lround(leaves.at(config::Leaf::TttMs)))};
            ran::A3Config rec = recommend_a3(cur);
            auto add = [&](config::Leaf leaf, double old, double now) {
                if (old != now) patch.entries.push_back({{key.first, key.second, leaf}, old, now});
            };
            add(config::Leaf::OffsetDb, cur.offset_db, rec.offset_db);
            add(config::Leaf::HysteresisDb, cur.hysteresis_db, rec.hysteresis_db);
            add(config::Leaf::TttMs, cur.ttt_ms, rec.ttt_ms);
            current += "gNB-" + std::to_string(key.first) + " cell " + std::to_string(key.second) +
                       ": offset " + num(cur.offset_db) + " dB, hysteresis " +
                       num(cur.hysteresis_db) + " dB, TTT " + std::to_string(cur.ttt_ms) + " ms. ";
        }
        if (patch.entries.empty())
            return {"Configuration inspected (" + current +
                        ") but the A3 parameters are already at the policy limits.",
                    ControlIntent::stop("No further A3 increase possible; escalate manually.")};
        reasoning::ProposalDraft draft{
            patch, "Ping-pong handovers with sub-" + num(params_.marginal_db) +
                       " dB trigger margins; raise A3 offset, hysteresis and time-to-trigger on " +
                       gnb_list(patch) + "."};
        return {"Configuration inspection done. " + current +
                    "With these values the entering condition is met by small, short-lived "
                    "RSRP swings, which explains the repeated handovers. A less sensitive "
                    "setting is prepared for operator review.",
                ControlIntent::ask_human("Recommend updated A3 parameters for " + gnb_list(patch) +
                                             "?",
                                         std::move(draft))};
    }

    // Stage 2: handover logs -> check trigger margins.
    if (const auto* logs = latest_ok(ctx, "LOG_QUERY")) {
        std::size_t triggers = 0, marginal = 0;
        for (const auto& r : logs->payload.at("records")) {
            if (r.at("kind") != "A3_TRIGGER" || !r.contains("trigger_margin_db")) continue;
            ++triggers;
            if (r.at("trigger_margin_db").get<double>() < params_.marginal_db) ++marginal;
        }
        if (triggers == 0 || 2 * marginal < triggers)
            return {"Log inspection done: " + std::to_string(marginal) + " of " +
                        std::to_string(triggers) + " A3 triggers had a margin below " +
                        num(params_.marginal_db) +
                        " dB, so the handovers are not explained by marginal A3 triggering.",
                    ControlIntent::stop("Handover churn not attributable to A3 sensitivity.")};
        return {"Log inspection done: " + std::to_string(marginal) + " of " +
                    std::to_string(triggers) + " A3 triggers exceeded the entering threshold by less "
                                               "than " +
                    num(params_.marginal_db) +
                    " dB. Handovers are driven by marginal signal differences: a ping-pong "
                    "pattern. Next: inspect the A3 configuration.",
                ControlIntent::continue_with({"CONFIG_GET", {{"path", "gnb/*/cell/*/a3"}}})};
    }

    if (!ctx.steps.empty())
        return {"Requested evidence is unavailable; the diagnosis cannot proceed.",
                ControlIntent::stop("Insufficient evidence.")};

    // Stage 1: classify the batch.
    auto found = detect(ctx.batch, params_);
    if (!found)
        return {"Mobility within normal bounds: no UE shows " +
                    std::to_string(params_.pp_count_threshold) + " or more handovers within " +
                    num(params_.pp_window_s) + " s.",
                ControlIntent::stop("normal")};

    double q = params_.window_quantum_s;
    double from = q * std::floor(found->times.front() / q);
    double to = q * std::ceil(found->times.back() / q);
    telemetry::LogQuery query;
    query.ue_id = found->ue_id;
    query.from_s = from;
    query.to_s = to;
    query.kinds = std::set<events::EventKind>{events::EventKind::A3Trigger,
                                              events::EventKind::HoSuccess};
    return {"Mobility anomaly: UE " + std::to_string(found->ue_id) + " completed " +
                std::to_string(found->times.size()) + " inter-cell handovers between " +
                fixed2(found->times.front()) + " s and " + fixed2(found->times.back()) + " s (" +
                std::to_string(found->in_window) + " within " + num(params_.pp_window_s) +
                " s). Stable mobility would not reverse this often. Next: inspect the handover "
                "logs.",
            ControlIntent::continue_with({"LOG_QUERY", telemetry::to_json(query)})};
}

LlmEndpoint LlmEndpoint::from_env() {
    LlmEndpoint ep;
    if (const char* v = std::getenv("NETANALYZER_LLM_ENDPOINT")) ep.url = v;
    if (const char* v = std::getenv("NETANALYZER_LLM_API_KEY")) ep.api_key = v;
    if (const char* v = std::getenv("NETANALYZER_LLM_MODEL")) ep.model = v;
    if (const char* v = std::getenv("NETANALYZER_LLM_TIMEOUT_S")) {
        char* end = nullptr;
        double s = std::strtod(v, &end);
        if (end == v || !(s > 0.0)) throw InvalidConfig("NETANALYZER_LLM_TIMEOUT_S");
        ep.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(s * 1000.0));
    }
    return ep;
}

std::string HttpTransport::post(const std::string& body) {
    const std::string& url = endpoint_.url;
    auto scheme = url.find("://");
    if (url.empty() || scheme == std::string::npos) throw RemoteError("endpoint url: " + url);
    auto path_start = url.find('/', scheme + 3);
    std::string base = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client cli(base);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
            throw Timeout(httplib::to_string(err));
        throw RemoteError(httplib::to_string(err));
    }
    if (res->status != 200) throw RemoteError("HTTP " + std::to_string(res->status));
    return res->body;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw RemoteError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string chomp(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

std::string pair_name(std::size_t n, const char* what) {
    std::ostringstream os;
    os << std::setw(4) << std::setfill('0') << n << '.' << what << ".json";
    return os.str();
}

}  // namespace

ReplayTransport::ReplayTransport(std::filesystem::path dir, bool strict) : strict_(strict) {
    if (!std::filesystem::is_directory(dir)) throw RemoteError("transcript dir " + dir.string());
    for (std::size_t n = 1;; ++n) {
        auto req = dir / pair_name(n, "request");
        auto resp = dir / pair_name(n, "response");
        if (!std::filesystem::exists(req) || !std::filesystem::exists(resp)) break;
        pairs_.push_back({chomp(read_file(req)), chomp(read_file(resp))});
    }
    if (pairs_.empty()) throw RemoteError("transcript dir " + dir.string() + " is empty");
}

std::string ReplayTransport::post(const std::string& body) {
    if (next_ >= pairs_.size()) throw RemoteError("transcript exhausted");
    const Pair& p = pairs_[next_++];
    if (strict_ && chomp(body) != p.request)
        throw RemoteError("request " + std::to_string(next_) + " differs from transcript");
    return p.response;
}

std::string_view system_preamble() {
    static const std::string text = R"(You are the reasoning core of a RAN analysis rApp. You diagnose mobility problems from batched RAN events and may only gather evidence through the tools below. You never change configuration yourself: you may propose a patch, which is applied by the orchestrator only after the operator approves it.

Modes:
- EVENT: first look at a new event batch; decide whether behaviour is abnormal.
- NEXT: request exactly one more piece of evidence with a tool.
- HUMAN: present findings or a proposal to the operator and wait.
- STOP: end the cycle with a summary.

Tools (exactly one per CONTINUE):
- LOG_QUERY params {"ue_id"?: int, "from_s": number, "to_s": number, "kinds"?: ["A3_TRIGGER"|"HO_ATTEMPT"|"HO_SUCCESS"|"HO_FAILURE"], "limit"?: 1..500}
- METRIC_QUERY params {"series": "RSRP"|"FPS", "cell_id"?: int, "from_s": number, "to_s": number, "downsample_s"?: number >= 0.1}
- CONFIG_GET params {"path": "gnb/<id|*>/cell/<index|*>/a3[/offset-db|/hysteresis-db|/ttt-ms]"}

Reply with one JSON object and nothing else:
{"mode": "NEXT"|"HUMAN"|"STOP",
 "explanation": "<operator-readable reasoning>",
 "intent": {"type": "CONTINUE", "tool": "<tool>", "params": {...}}
         | {"type": "ASK_HUMAN", "question": "<text>", "proposal"?: {"rationale": "<text>", "entries": [{"path": "<full leaf path>", "expected_old": number, "new": number}]}}
         | {"type": "STOP", "summary": "<text>"}}
mode must be NEXT for CONTINUE, HUMAN for ASK_HUMAN and STOP for STOP. No other keys are accepted.)";
    return text;
}

json build_request(const AgentContext& ctx, const std::string& model) {
    return {
        {"model", model},
        {"temperature", 0},
        {"response_format", {{"type", "json_object"}}},
        {"messages",
         json::array({{{"role", "system"}, {"content", std::string(system_preamble())}},
                      {{"role", "user"}, {"content", reasoning::render_context(ctx)}}})},
    };
}

AgentOutput parse_agent_reply(std::string_view content) {
    json doc = json::parse(content, nullptr, false);
    if (doc.is_discarded()) throw ParseFailure("reply is not a single JSON document");
    if (!doc.is_object()) throw ParseFailure("reply: expected an object");
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it.key() != "mode" && it.key() != "explanation" && it.key() != "intent")
            throw ParseFailure("reply: unknown key '" + it.key() + "'");
    if (!doc.contains("mode") || !doc["mode"].is_string()) throw ParseFailure("reply.mode");
    if (!doc.contains("explanation") || !doc["explanation"].is_string())
        throw ParseFailure("reply.explanation");
    if (!doc.contains("intent")) throw ParseFailure("reply.intent");

    AgentOutput out;
    out.explanation = doc["explanation"].get<std::string>();
    out.intent = reasoning::control_intent_from_json(doc["intent"]);
    auto mode = reasoning::mode_from_string(doc["mode"].get<std::string>());
    if (!mode || *mode != reasoning::resulting_mode(out.intent.type))
        throw ParseFailure("reply.mode inconsistent with intent");
    return out;
}

json encode_agent_reply(const AgentOutput& out) {
    return {{"mode", reasoning::to_string(reasoning::resulting_mode(out.intent.type))},
            {"explanation", out.explanation},
            {"intent", reasoning::to_json(out.intent)}};
}

AgentOutput parse_chat_completion(std::string_view body) {
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ParseFailure("response body is not JSON");
    if (doc.contains("error")) throw RemoteError("remote error: " + doc["error"].dump());
    const json* content = nullptr;
    if (auto c = doc.find("choices"); c != doc.end() && c->is_array() && !c->empty()) {
        const json& first = (*c)[0];
        if (first.is_object() && first.contains("message") && first["message"].is_object()) {
            auto m = first["message"].find("content");
            if (m != first["message"].end() && m->is_string()) content = &*m;
        }
    }
    if (!content) throw ParseFailure("response: choices[0].message.content missing");
    return parse_agent_reply(content->get<std::string>());
}

json encode_chat_completion(const AgentOutput& out, const std::string& model) {
    return {{"object", "chat.completion"},
            {"model", model},
            {"choices",
             json::array({{{"index", 0},
                           {"message",
                            {{"role", "assistant"}, {"content", encode_agent_reply(out).dump()}}},
                           {"finish_reason", "stop"}}})}};
}

void write_transcript_pair(const std::filesystem::path& dir, std::size_t n,
                           const std::string& request, const std::string& response) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / pair_name(n, "request"), std::ios::binary) << request << '\n';
    std::ofstream(dir / pair_name(n, "response"), std::ios::binary) << response << '\n';
}

LlmAgent::LlmAgent(Transport& transport, std::string model,
                   std::optional<std::filesystem::path> transcript_dir)
    : transport_(transport), model_(std::move(model)), transcript_dir_(std::move(transcript_dir)) {}

AgentOutput LlmAgent::analyze(const AgentContext& ctx) {
    const std::string request = build_request(ctx, model_).dump();
    const std::size_t n = ++calls_;
    std::string response;
    try {
        response = transport_.post(request);
    } catch (const std::exception& e) {
        if (transcript_dir_)
            write_transcript_pair(*transcript_dir_, n, request, json{{"error", e.what()}}.dump());
        throw;
    }
    if (transcript_dir_) write_transcript_pair(*transcript_dir_, n, request, response);
    return parse_chat_completion(response);
}

TranscriptRecorder::TranscriptRecorder(reasoning::Agent& inner, std::string model,
                                       std::filesystem::path dir)
    : inner_(inner), model_(std::move(model)), dir_(std::move(dir)) {}

AgentOutput TranscriptRecorder::analyze(const AgentContext& ctx) {
    const std::string request = build_request(ctx, model_).dump();
    AgentOutput out = inner_.analyze(ctx);
    const std::string response = encode_chat_completion(out, model_).dump();
    write_transcript_pair(dir_, ++calls_, request, response);
    return parse_chat_completion(response);
}

}  // namespace netanalyzer::agents
