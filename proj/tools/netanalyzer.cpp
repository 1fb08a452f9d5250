// netanalyzer: run experiments, serve the rApp API, inspect recorded traces.
#include <pthread.h>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "netanalyzer/agents.hpp"
#include "netanalyzer/error.hpp"
#include "netanalyzer/rapp.hpp"
#include "netanalyzer/service.hpp"

namespace fs = std::filesystem;
using namespace netanalyzer;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 1;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

rapp::ScenarioSpec scenario_arg(const std::string& arg) {
    if (arg == "ref" || arg == "reference") return rapp::reference_scenario();
    if (!fs::is_regular_file(arg)) throw UsageError("scenario file not found: " + arg);
    return rapp::load_scenario(arg);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct RunArgs {
    std::string scenario;
    std::string mode = "baseline";
    bool auto_approve = false;
    std::string out;
    std::string agent = "rule";
    std::string transcripts;
    std::string record;
    bool quiet = false;
};

int cmd_run(const RunArgs& a) {
    rapp::ScenarioSpec spec = scenario_arg(a.scenario);
    rapp::ExperimentOptions opts;
    opts.mode = rapp::run_mode_from_string(a.mode);
    opts.auto_approve = a.auto_approve;
    if (!a.quiet)
        opts.on_progress = [](const nlohmann::json& p) { std::cerr << p.dump() << "\n"; };

    agents::RuleAgent rule;
    std::unique_ptr<agents::Transport> transport;
    std::unique_ptr<reasoning::Agent> wrapped;
    const std::string model = agents::LlmEndpoint::from_env().model;
    if (a.agent == "replay") {
        if (a.transcripts.empty()) throw UsageError("--agent replay needs --transcripts");
        if (!fs::is_directory(a.transcripts)) throw UsageError("transcript directory not found: " + a.transcripts);
        transport = std::make_unique<agents::ReplayTransport>(a.transcripts);
        wrapped = std::make_unique<agents::LlmAgent>(*transport, model);
    } else if (a.agent == "remote") {
        auto ep = agents::LlmEndpoint::from_env();
        if (ep.url.empty()) throw UsageError("--agent remote needs NETANALYZER_LLM_ENDPOINT");
        transport = std::make_unique<agents::HttpTransport>(ep);
        wrapped = a.record.empty() ? std::make_unique<agents::LlmAgent>(*transport, model)
                                   : std::make_unique<agents::LlmAgent>(*transport, model, fs::path(a.record));
    } else if (!a.record.empty()) {
        fs::create_directories(a.record);
        wrapped = std::make_unique<agents::TranscriptRecorder>(rule, model, a.record);
    }
    opts.agent = wrapped ? wrapped.get() : &rule;

    rapp::RunReport report = rapp::run_experiment(spec, opts);
    std::string text = report.to_json().dump(2) + "\n";
    if (a.out.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(a.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + a.out);
        out << text;
    }
    std::cerr << "status " << rapp::to_string(report.status) << ", config version "
              << report.config_version << "\n";
    return 0;
}

int cmd_serve(int port, const std::string& config, const std::string& host) {
    service::ServiceOptions opts = service::ServiceOptions::from_env();
    if (port >= 0) opts.port = port;
    if (!host.empty()) opts.host = host;
    if (!config.empty()) opts.scenario = scenario_arg(config);

    // Blocked before any thread starts so that only sigwait() sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    service::Service svc(opts);
    int bound = svc.start();
    std::cerr << "listening on " << opts.host << ":" << bound << "\n";
    int sig = 0;
    sigwait(&signals, &sig);
    std::cerr << "shutting down\n";
    svc.stop();
    return 0;
}

// Prints the agent reply of every recorded response in a transcript
// directory, or the mode trace of a cycle-trace / report file.
int cmd_replay(const std::string& path) {
    if (!fs::exists(path)) throw UsageError("not found: " + path);
    if (fs::is_directory(path)) {
        std::vector<fs::path> responses;
        for (const auto& e : fs::directory_iterator(path))
            if (e.path().filename().string().ends_with(".response.json")) responses.push_back(e.path());
        std::sort(responses.begin(), responses.end());
        if (responses.empty()) throw std::runtime_error("no transcript pairs in " + path);
        for (const auto& r : responses) {
            auto out = agents::parse_chat_completion(slurp(r));
            std::cout << r.filename().string() << " " << reasoning::to_string(out.intent.type) << ": "
                      << out.explanation.substr(0, out.explanation.find('\n')) << "\n";
        }
        return 0;
    }

    std::string text = slurp(path);
    std::vector<reasoning::ReasoningStep> steps;
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (!doc.is_discarded() && doc.is_object() && doc.contains("report")) {
        for (const auto& c : doc["report"]["cycles"]) {
            std::cout << c.at("cycle_id").get<std::string>() << ":";
            for (const auto& m : c.at("mode_trace")) std::cout << " " << m.get<std::string>();
            std::cout << "\n";
        }
        return 0;
    }
    std::istringstream lines(text);
    std::string line;
    std::cout << "EVENT";
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded()) throw std::runtime_error("not a cycle trace: " + path);
        auto step = reasoning::reasoning_step_from_json(rec);
        std::cout << " " << step.label;
        steps.push_back(std::move(step));
    }
    std::cout << "\n";
    if (steps.empty()) throw std::runtime_error("empty trace: " + path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM-assisted handover diagnosis rApp"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run the scenario once and write a report");
    run_cmd->add_option("--scenario", run.scenario, "Scenario file, or 'ref' for the built-in one")->required();
    run_cmd->add_option("--mode", run.mode, "baseline | with-rapp")
        ->check(CLI::IsMember({"baseline", "with-rapp", "BASELINE", "WITH_RAPP"}));
    run_cmd->add_flag("--auto-approve", run.auto_approve, "Answer the approval prompt with the scripted operator");
    run_cmd->add_option("--out", run.out, "Report path (stdout when omitted)");
    run_cmd->add_option("--agent", run.agent, "rule | replay | remote")
        ->check(CLI::IsMember({"rule", "replay", "remote"}));
    run_cmd->add_option("--transcripts", run.transcripts, "Transcript directory for --agent replay");
    run_cmd->add_option("--record-transcripts", run.record, "Write request/response pairs here");
    run_cmd->add_flag("-q,--quiet", run.quiet, "No progress on stderr");

    int port = -1;
    std::string config, host;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
    serve_cmd->add_option("--port", port, "Listen port (0 = any)")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--config", config, "Scenario file whose cells seed the config tree");
    serve_cmd->add_option("--host", host, "Bind address");

    std::string replay_path;
    auto* replay_cmd = app.add_subcommand("replay", "Show a cycle trace, report, or transcript directory");
    replay_cmd->add_option("path", replay_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*run_cmd) return cmd_run(run);
        if (*serve_cmd) return cmd_serve(port, config, host);
        if (*replay_cmd) return cmd_replay(replay_path);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
