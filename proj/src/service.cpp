#include "netanalyzer/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "netanalyzer/agents.hpp"
#include "netanalyzer/error.hpp"

namespace netanalyzer::service {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kNdjson = "application/x-ndjson";

// Remote backend bundled with the transport it talks through.
class RemoteAgent final : public reasoning::Agent {
public:
    explicit RemoteAgent(const agents::LlmEndpoint& ep) : transport_(ep), agent_(transport_, ep.model) {}
    std::string name() const override { return agent_.name(); }
    reasoning::AgentOutput analyze(const reasoning::AgentContext& ctx) override {
        return agent_.analyze(ctx);
    }

private:
    agents::HttpTransport transport_;
    agents::LlmAgent agent_;
};

std::unique_ptr<reasoning::Agent> make_agent(AgentBackend backend) {
    if (backend == AgentBackend::Rule) return std::make_unique<agents::RuleAgent>();
    auto ep = agents::LlmEndpoint::from_env();
    if (ep.url.empty()) throw InvalidConfig("NETANALYZER_LLM_ENDPOINT: not set");
    return std::make_unique<RemoteAgent>(ep);
}

int http_status(const std::string& code) {
    static const std::map<std::string, int> table{
        {"InvalidQuery", 400},     {"MalformedEvent", 400}, {"InvalidPatch", 400},
        {"InvalidPath", 400},      {"InvalidScenario", 400}, {"InvalidConfig", 400},
        {"UnknownSeries", 400},    {"PathNotFound", 404},   {"UnknownProposal", 404},
        {"UnknownCycle", 404},     {"NotPending", 409},     {"NotParked", 409},
        {"CycleFinished", 409},    {"CycleParked", 409},    {"CycleConflict", 409},
        {"NotApproved", 409},      {"StaleValue", 409},     {"QueueFull", 503},
    };
    auto it = table.find(code);
    return it == table.end() ? 500 : it->second;
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void reply_error(httplib::Response& res, const Error& e) {
    reply(res, http_status(e.code()), {{"error", e.code()}, {"detail", e.detail()}});
}

json parse_body(const httplib::Request& req) {
    json doc = json::parse(req.body, nullptr, false);
    if (doc.is_discarded()) throw InvalidQuery("body: not valid JSON");
    return doc;
}

std::uint64_t since_param(const httplib::Request& req) {
    if (!req.has_param("since")) return 0;
    const std::string v = req.get_param_value("since");
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw InvalidQuery("since");
    return std::stoull(v);
}

std::string mode_badge(reasoning::Mode m) { return std::string(reasoning::to_string(m)); }

}  // namespace

AgentBackend agent_backend_from_string(std::string_view name) {
    std::string up;
    for (char c : name) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "RULE") return AgentBackend::Rule;
    if (up == "REMOTE") return AgentBackend::Remote;
    throw InvalidConfig("agent: expected RULE or REMOTE");
}

ServiceOptions ServiceOptions::from_env() {
    ServiceOptions o;
    if (const char* v = std::getenv("NETANALYZER_PORT")) {
        char* end = nullptr;
        long p = std::strtol(v, &end, 10);
        if (end == v || *end || p < 0 || p > 65535) throw InvalidConfig("NETANALYZER_PORT");
        o.port = static_cast<int>(p);
    }
    if (const char* v = std::getenv("NETANALYZER_AGENT")) o.agent = agent_backend_from_string(v);
    if (const char* v = std::getenv("NETANALYZER_SCENARIO_DIR")) o.scenario_dir = v;
    return o;
}

std::uint64_t StreamLog::append(json record) {
    std::uint64_t seq;
    {
        std::lock_guard lock(mu_);
        seq = records_.size() + 1;
        record["seq"] = seq;
        records_.push_back(std::move(record));
    }
    cv_.notify_all();
    return seq;
}

std::vector<json> StreamLog::since(std::uint64_t after_seq) const {
    std::lock_guard lock(mu_);
    if (after_seq >= records_.size()) return {};
    return {records_.begin() + static_cast<std::ptrdiff_t>(after_seq), records_.end()};
}

bool StreamLog::wait(std::uint64_t after_seq, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return closed_ || records_.size() > after_seq; }) &&
           records_.size() > after_seq;
}

void StreamLog::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool StreamLog::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

std::vector<json> chat_entries(const reasoning::ReasoningCycle& c, CycleCursor& cur,
                               const std::string& run_id) {
    std::vector<json> out;
    auto base = [&](std::string id, const char* author) {
        json e = {{"type", "chat"}, {"id", std::move(id)}, {"author", author}, {"cycle_id", c.cycle_id}};
        if (!run_id.empty()) e["run_id"] = run_id;
        return e;
    };
    const std::string prefix = run_id.empty() ? c.cycle_id : run_id + "/" + c.cycle_id;

    if (!cur.announced) {
        json e = base(prefix, "RAPP");
        e["mode"] = "EVENT";
        e["label"] = "EVENT";
        e["text"] = reasoning::batch_summary(c.batch).dump();
        e["batch_id"] = c.batch.batch_id;
        out.push_back(std::move(e));
        cur.announced = true;
    }
    auto turn = [&](std::size_t i) {
        const auto& t = c.human_turns[i];
        json e = base(prefix + "/op/" + std::to_string(i + 1), "OPERATOR");
        e["text"] = t.text;
        e["operator"] = t.operator_id;
        if (!t.proposal_id.empty()) e["proposal_id"] = t.proposal_id;
        if (!t.outcome.empty()) e["outcome"] = t.outcome;
        e["timestamp_ms"] = t.timestamp_ms;
        out.push_back(std::move(e));
    };
    for (; cur.steps < c.steps.size(); ++cur.steps) {
        const auto& s = c.steps[cur.steps];
        while (cur.turns < c.human_turns.size() && c.human_turns[cur.turns].after_step < s.index)
            turn(cur.turns++);
        // Same id scheme as the ReasoningStep audit subject.
        json e = base(c.cycle_id + "#" + std::to_string(s.index), "RAPP");
        if (!run_id.empty()) e["id"] = run_id + "/" + e["id"].get<std::string>();
        e["mode"] = mode_badge(s.resulting_mode);
        e["label"] = s.label;
        e["text"] = s.explanation;
        e["intent"] = reasoning::to_json(s.intent);
        if (!s.proposal_id.empty()) e["proposal_id"] = s.proposal_id;
        if (s.forced) e["forced"] = true;
        e["timestamp_ms"] = s.timestamp_ms;
        out.push_back(std::move(e));
    }
    for (; cur.turns < c.human_turns.size();) turn(cur.turns++);
    return out;
}

Service::Service(ServiceOptions options)
    : options_(std::move(options)),
      clock_(system_clock()),
      audit_(clock_),
      pipeline_({}, &audit_) {
    options_.scenario.validate();
    config_ = std::make_unique<config::ConfigService>(
        options_.scenario.with_a3(options_.scenario.misconfigured).cells, audit_, clock_);
    gateway_ = std::make_unique<reasoning::ToolGateway>(telemetry_, *config_, audit_);
    orchestrator_ = std::make_unique<reasoning::Orchestrator>(
        *gateway_, *config_, audit_, clock_,
        reasoning::OrchestratorOptions{options_.scenario.iteration_cap, 2});
    agent_ = make_agent(options_.agent);
    server_ = std::make_unique<httplib::Server>();
    server_->new_task_queue = [] { return new httplib::ThreadPool(16); };
    routes();
}

Service::~Service() { stop(); }

int Service::start() {
    if (options_.port == 0)
        port_ = server_->bind_to_any_port(options_.host);
    else
        port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
    if (port_ <= 0)
        throw std::runtime_error("cannot bind " + options_.host + ":" + std::to_string(options_.port));
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    worker_ = std::thread([this] { worker(); });
    server_->wait_until_ready();
    return port_;
}

void Service::wait() {
    std::unique_lock lock(stop_mu_);
    stop_cv_.wait(lock, [&] { return stopping_; });
}

void Service::stop() {
    {
        std::lock_guard lock(stop_mu_);
        if (stopping_ && !listener_.joinable() && !worker_.joinable()) return;
        stopping_ = true;
    }
    stop_cv_.notify_all();
    stream_.close();
    server_->stop();
    if (listener_.joinable()) listener_.join();
    if (worker_.joinable()) worker_.join();
    std::vector<std::thread> runs;
    {
        std::lock_guard lock(runs_mu_);
        runs.swap(run_threads_);
    }
    for (auto& t : runs) t.join();
}

void Service::worker() {
    std::unique_lock lock(stop_mu_);
    while (!stopping_) {
        lock.unlock();
        try {
            pump();
        } catch (const std::exception&) {
            // Failures are already in the audit log; the loop keeps going.
        }
        lock.lock();
        stop_cv_.wait_for(lock, options_.poll_interval, [&] { return stopping_; });
    }
}

void Service::pump() {
    std::lock_guard lock(batch_mu_);
    while (auto batch = pipeline_.poll_batch(options_.scenario.batch_policy, clock_()))
        waiting_.push_back(std::move(*batch));
    // Batches start in arrival order; one that overlaps a live cycle waits.
    while (!waiting_.empty() && !orchestrator_->conflicts(waiting_.front().ue_ids())) {
        std::string id = orchestrator_->start_cycle(waiting_.front(), *agent_);
        waiting_.pop_front();
        sync_cycle(id);
        orchestrator_->run(id);
        sync_cycle(id);
        sync_proposals();
    }
}

void Service::sync_cycle(const std::string& cycle_id) {
    std::lock_guard lock(sync_mu_);
    auto c = orchestrator_->cycle(cycle_id);
    for (auto& e : chat_entries(c, cursors_[cycle_id])) stream_.append(std::move(e));
}

void Service::sync_proposals() {
    std::lock_guard lock(sync_mu_);
    for (const auto& p : config_->proposals()) {
        std::string status(config::to_string(p.status));
        auto& seen = proposal_status_[p.proposal_id];
        if (seen == status) continue;
        seen = status;
        stream_.append({{"type", "proposal"}, {"proposal", config::to_json(p)}});
    }
}

rapp::ScenarioSpec Service::resolve_scenario(const json& ref) const {
    if (ref.is_object()) return rapp::scenario_from_json(ref);
    if (!ref.is_string()) throw InvalidScenario("scenario: expected a name or an object");
    std::string name = ref.get<std::string>();
    if (name == "ref" || name == "reference") return rapp::reference_scenario();
    if (!options_.scenario_dir) throw InvalidScenario("scenario: no scenario directory configured");
    if (name.empty() || name.find('/') != std::string::npos || name.find("..") != std::string::npos)
        throw InvalidScenario("scenario: bad name");
    auto path = *options_.scenario_dir / name;
    if (path.extension() != ".json") path += ".json";
    return rapp::load_scenario(path);
}

std::string Service::start_run(const json& body) {
    if (!body.is_object()) throw InvalidQuery("body: expected an object");
    for (auto it = body.begin(); it != body.end(); ++it)
        if (it.key() != "scenario" && it.key() != "mode" && it.key() != "auto_approve")
            throw InvalidQuery(it.key() + ": unknown field");
    rapp::ScenarioSpec spec = resolve_scenario(body.value("scenario", json("reference")));
    rapp::ExperimentOptions opts;
    const json& mode = body.value("mode", json("BASELINE"));
    if (!mode.is_string()) throw InvalidQuery("mode: expected a string");
    opts.mode = rapp::run_mode_from_string(mode.get<std::string>());
    const json& auto_approve = body.value("auto_approve", json(false));
    if (!auto_approve.is_boolean()) throw InvalidQuery("auto_approve: expected a boolean");
    opts.auto_approve = auto_approve.get<bool>();

    std::lock_guard lock(runs_mu_);
    std::string run_id = "run-" + std::to_string(next_run_++);
    runs_[run_id].run_id = run_id;
    run_threads_.emplace_back([this, run_id, spec, opts]() mutable {
        // Each run owns its stores and its agent; only the stream is shared.
        auto agent = make_agent(options_.agent);
        auto cursors = std::make_shared<std::map<std::string, CycleCursor>>();
        opts.agent = agent.get();
        opts.on_progress = [this, run_id](const json& p) {
            stream_.append({{"type", "run_progress"}, {"run_id", run_id}, {"progress", p}});
        };
        opts.on_cycle = [this, run_id, cursors](const reasoning::ReasoningCycle& c) {
            for (auto& e : chat_entries(c, (*cursors)[c.cycle_id], run_id)) stream_.append(std::move(e));
        };
        Run done;
        done.run_id = run_id;
        try {
            auto report = rapp::run_experiment(spec, opts);
            done.status = "DONE";
            done.report = report.to_json();
        } catch (const Error& e) {
            done.status = "FAILED";
            done.error = {{"error", e.code()}, {"detail", e.detail()}};
        } catch (const std::exception& e) {
            done.status = "FAILED";
            done.error = {{"error", "InternalError"}, {"detail", e.what()}};
        }
        stream_.append({{"type", "run_status"}, {"run_id", run_id}, {"status", done.status}});
        std::lock_guard l(runs_mu_);
        runs_[run_id] = std::move(done);
    });
    return run_id;
}

void Service::routes() {
    auto& s = *server_;

    // Error mapping shared by every handler.
    auto guard = [](auto fn) {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const Error& e) {
                reply_error(res, e);
            } catch (const std::exception& e) {
                reply(res, 500, {{"error", "InternalError"}, {"detail", e.what()}});
            }
        };
    };

    s.Get("/healthz", guard([this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200,
              {{"status", "ok"},
               {"agent", agent_->name()},
               {"config_version", config_->version()},
               {"queue_depth", pipeline_.depth()},
               {"audit_records", audit_.size()}});
    }));

    s.Post("/events", guard([this](const httplib::Request& req, httplib::Response& res) {
        std::vector<json> docs;
        json whole = json::parse(req.body, nullptr, false);
        if (!whole.is_discarded() && whole.is_array()) {
            docs.assign(whole.begin(), whole.end());
        } else if (!whole.is_discarded()) {
            docs.push_back(whole);
        } else {
            // Newline-delimited; unreadable lines go to quarantine as raw text.
            std::size_t pos = 0;
            while (pos < req.body.size()) {
                std::size_t nl = req.body.find('\n', pos);
                std::string line = req.body.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
                pos = nl == std::string::npos ? req.body.size() : nl + 1;
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                json d = json::parse(line, nullptr, false);
                docs.push_back(d.is_discarded() ? json(line) : d);
            }
        }
        json accepted = json::array();
        std::size_t quarantined = 0;
        for (const auto& d : docs) {
            std::int64_t now = clock_();
            try {
                auto ev = pipeline_.submit({events::EventSource::External, d, now}, now);
                if (ev) {
                    telemetry_.append_log(telemetry::log_record_from_event(*ev));
                    accepted.push_back(ev->event_id);
                } else {
                    ++quarantined;
                }
            } catch (const QueueFull& e) {
                reply(res, 503,
                      {{"error", e.code()}, {"detail", e.detail()}, {"accepted", accepted},
                       {"quarantined", quarantined}});
                return;
            }
        }
        reply(res, 202, {{"accepted", accepted}, {"quarantined", quarantined}});
    }));

    s.Get("/batches", guard([this](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& b : pipeline_.emitted_batches()) out.push_back(events::to_json(b));
        reply(res, 200, out);
    }));

    s.Post("/chat", guard([this](const httplib::Request& req, httplib::Response& res) {
        json body = parse_body(req);
        if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
            throw InvalidQuery("text");
        for (auto it = body.begin(); it != body.end(); ++it)
            if (it.key() != "text" && it.key() != "cycle_id" && it.key() != "operator")
                throw InvalidQuery(it.key() + ": unknown field");
        std::string cycle_id;
        if (body.contains("cycle_id")) {
            if (!body["cycle_id"].is_string()) throw InvalidQuery("cycle_id");
            cycle_id = body["cycle_id"].get<std::string>();
        } else if (auto parked = orchestrator_->latest_parked_cycle()) {
            cycle_id = *parked;
        } else {
            throw NotParked("no cycle is waiting for the operator");
        }
        std::string op = body.value("operator", std::string("operator"));
        auto c = orchestrator_->resume_with_human_input(
            cycle_id, reasoning::HumanInput::chat(body["text"].get<std::string>(), op));
        sync_cycle(cycle_id);
        sync_proposals();
        reply(res, 200, reasoning::to_json(c));
    }));

    s.Get("/chat/stream", [this](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t since = 0;
        try {
            since = since_param(req);
        } catch (const Error& e) {
            reply_error(res, e);
            return;
        }
        bool follow = req.has_param("follow") && req.get_param_value("follow") != "0" &&
                      req.get_param_value("follow") != "false";
        auto cursor = std::make_shared<std::uint64_t>(since);
        res.set_chunked_content_provider(
            kNdjson, [this, cursor, follow](std::size_t, httplib::DataSink& sink) {
                for (;;) {
                    for (const auto& r : stream_.since(*cursor)) {
                        std::string line = r.dump() + "\n";
                        if (!sink.write(line.data(), line.size())) return false;
                        *cursor = r["seq"].get<std::uint64_t>();
                    }
                    if (!follow || stream_.closed()) break;
                    if (!sink.is_writable()) return false;
                    stream_.wait(*cursor, std::chrono::milliseconds(500));
                }
                sink.done();
                return true;
            });
    });

    s.Get("/proposals", guard([this](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& p : config_->proposals()) out.push_back(config::to_json(p));
        reply(res, 200, out);
    }));

    auto decide = [this](config::Decision d) {
        return [this, d](const httplib::Request& req, httplib::Response& res) {
            std::string id = req.matches[1];
            config_->proposal(id);  // UnknownProposal -> 404
            std::string op = "operator";
            if (!req.body.empty()) {
                json body = parse_body(req);
                if (body.is_object() && body.contains("operator") && body["operator"].is_string())
                    op = body["operator"].get<std::string>();
            }
            // A proposal still owned by a parked cycle goes through the
            // cycle, so the agent sees the outcome and can confirm it.
            if (auto cycle_id = orchestrator_->cycle_for_proposal(id)) {
                orchestrator_->resume_with_human_input(*cycle_id,
                                                       reasoning::HumanInput::decide(id, d, op));
                sync_cycle(*cycle_id);
            } else {
                config_->decide(id, d, op);
                if (d == config::Decision::Approve) {
                    try {
                        config_->apply(id);
                    } catch (const Error&) {
                        // FAILED status is recorded on the proposal itself.
                    }
                }
            }
            sync_proposals();
            reply(res, 200, config::to_json(config_->proposal(id)));
        };
    };
    s.Post(R"(/proposals/([^/]+)/approve)", guard(decide(config::Decision::Approve)));
    s.Post(R"(/proposals/([^/]+)/reject)", guard(decide(config::Decision::Reject)));

    s.Get("/audit", guard([this](const httplib::Request& req, httplib::Response& res) {
        json out = json::array();
        for (const auto& r : audit_.records_since(since_param(req))) out.push_back(to_json(r));
        reply(res, 200, out);
    }));

    s.Get("/config", guard([this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, config_->export_json());
    }));

    s.Get("/config/history", guard([this](const httplib::Request&, httplib::Response& res) {
        json versions = json::array();
        for (const auto& v : config_->version_history())
            versions.push_back({{"version", v.version}, {"proposal_id", v.proposal_id}, {"at_ms", v.at_ms}});
        json records = json::array();
        for (const auto& r : config_->history()) records.push_back(to_json(r));
        reply(res, 200, {{"version", config_->version()}, {"versions", versions}, {"records", records}});
    }));

    s.Post("/runs", guard([this](const httplib::Request& req, httplib::Response& res) {
        json body = req.body.empty() ? json::object() : parse_body(req);
        std::string id = start_run(body);
        reply(res, 202, {{"run_id", id}, {"status", "RUNNING"}});
    }));

    s.Get(R"(/runs/([^/]+)/report)", guard([this](const httplib::Request& req, httplib::Response& res) {
        std::string id = req.matches[1];
        std::lock_guard lock(runs_mu_);
        auto it = runs_.find(id);
        if (it == runs_.end()) {
            reply(res, 404, {{"error", "UnknownRun"}, {"detail", id}});
        } else if (it->second.status == "RUNNING") {
            reply(res, 202, {{"run_id", id}, {"status", "RUNNING"}});
        } else if (it->second.status == "FAILED") {
            reply(res, 500, {{"run_id", id}, {"status", "FAILED"}, {"error", it->second.error}});
        } else {
            reply(res, 200, it->second.report);
        }
    }));
}

}  // namespace netanalyzer::service
