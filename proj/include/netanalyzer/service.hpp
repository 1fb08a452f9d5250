#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "netanalyzer/audit.hpp"
#include "netanalyzer/config.hpp"
#include "netanalyzer/events.hpp"
#include "netanalyzer/rapp.hpp"
#include "netanalyzer/reasoning.hpp"
#include "netanalyzer/telemetry.hpp"

namespace httplib {
class Server;
}

namespace netanalyzer::service {

enum class AgentBackend { Rule, Remote };
AgentBackend agent_backend_from_string(std::string_view name);

struct ServiceOptions {
    std::string host = "127.0.0.1";
    // 0 binds an ephemeral port.
    int port = 8080;
    // Cells, batching policy and iteration cap of the live loop.
    rapp::ScenarioSpec scenario = rapp::reference_scenario();
    AgentBackend agent = AgentBackend::Rule;
    // Where POST /runs looks up scenarios given by name.
    std::optional<std::filesystem::path> scenario_dir;
    std::chrono::milliseconds poll_interval{50};

    // NETANALYZER_PORT, NETANALYZER_AGENT (RULE | REMOTE),
    // NETANALYZER_SCENARIO_DIR; the LLM variables are read by the agent.
    static ServiceOptions from_env();
};

// Append-only record log behind GET /chat/stream. Records get consecutive
// seq numbers starting at 1.
class StreamLog {
public:
    std::uint64_t append(nlohmann::json record);
    std::vector<nlohmann::json> since(std::uint64_t after_seq) const;
    // Blocks until a record newer than after_seq exists, the timeout passes,
    // or close() is called.
    bool wait(std::uint64_t after_seq, std::chrono::milliseconds timeout) const;
    void close();
    bool closed() const;

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<nlohmann::json> records_;
    bool closed_ = false;
};

// Chat entries for everything in `cycle` past the given cursors: an EVENT
// entry when the cycle first appears, one RAPP entry per step and one
// OPERATOR entry per human turn, in dialogue order.
struct CycleCursor {
    bool announced = false;
    std::size_t steps = 0;
    std::size_t turns = 0;
};
std::vector<nlohmann::json> chat_entries(const reasoning::ReasoningCycle& cycle, CycleCursor& cursor,
                                         const std::string& run_id = {});

class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds and starts serving in the background; returns the bound port.
    // Throws std::runtime_error when the address cannot be bound.
    int start();
    // Blocks until stop() is called from elsewhere.
    void wait();
    void stop();

    int port() const { return port_; }
    AuditLog& audit() { return audit_; }
    config::ConfigService& config() { return *config_; }
    reasoning::Orchestrator& orchestrator() { return *orchestrator_; }
    events::EventPipeline& pipeline() { return pipeline_; }
    StreamLog& stream() { return stream_; }

    // One worker pass: cut due batches and run whatever can start.
    void pump();

private:
    struct Run {
        std::string run_id;
        std::string status = "RUNNING";
        nlohmann::json report;
        nlohmann::json error;
    };

    void routes();
    void worker();
    void sync_cycle(const std::string& cycle_id);
    void sync_proposals();
    std::string start_run(const nlohmann::json& body);
    rapp::ScenarioSpec resolve_scenario(const nlohmann::json& ref) const;

    ServiceOptions options_;
    Clock clock_;
    AuditLog audit_;
    std::unique_ptr<config::ConfigService> config_;
    telemetry::TelemetryStore telemetry_;
    events::EventPipeline pipeline_;
    std::unique_ptr<reasoning::ToolGateway> gateway_;
    std::unique_ptr<reasoning::Orchestrator> orchestrator_;
    std::unique_ptr<reasoning::Agent> agent_;
    std::unique_ptr<httplib::Server> server_;
    StreamLog stream_;
    int port_ = 0;

    std::mutex batch_mu_;
    std::deque<events::EventBatch> waiting_;

    std::mutex sync_mu_;
    std::map<std::string, CycleCursor> cursors_;
    std::map<std::string, std::string> proposal_status_;

    std::mutex runs_mu_;
    std::map<std::string, Run> runs_;
    std::vector<std::thread> run_threads_;
    std::uint64_t next_run_ = 1;

    std::mutex stop_mu_;
    std::condition_variable stop_cv_;
    bool stopping_ = false;
    std::thread listener_;
    std::thread worker_;
};

}  // namespace netanalyzer::service
