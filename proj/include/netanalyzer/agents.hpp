#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "netanalyzer/ran/a3.hpp"
#include "netanalyzer/reasoning.hpp"

namespace netanalyzer::agents {

using reasoning::AgentContext;
using reasoning::AgentOutput;

// Recommendation policy applied once ping-pong is confirmed. Never decreases a
// parameter: offset and hysteresis double (at least +1 dB), capped at 15 dB;
// ttt moves to the smallest allowed value >= 3x the current one and strictly
// above it, capped at 1024 ms. (2, 2, 100) -> (4, 4, 320).
ran::A3Config recommend_a3(const ran::A3Config& current);
int recommend_ttt(int ttt_ms);

struct RuleAgentParams {
    std::size_t pp_count_threshold = 3;
    double pp_window_s = 10.0;
    double marginal_db = 1.0;
    // Log window bounds are widened outward to multiples of this.
    double window_quantum_s = 5.0;

    void validate() const;
};

// Deterministic staged diagnosis keyed on the evidence already gathered:
// classify -> logs -> config -> proposal -> operator dialogue -> stop.
class RuleAgent final : public reasoning::Agent {
public:
    explicit RuleAgent(RuleAgentParams params = {});

    std::string name() const override { return "rule"; }
    AgentOutput analyze(const AgentContext& ctx) override;

    const RuleAgentParams& params() const { return params_; }

private:
    RuleAgentParams params_;
};

// Remote chat-completion endpoint. Values come from NETANALYZER_LLM_ENDPOINT,
// NETANALYZER_LLM_API_KEY, NETANALYZER_LLM_MODEL, NETANALYZER_LLM_TIMEOUT_S.
struct LlmEndpoint {
    std::string url;
    std::string api_key;
    std::string model = "gpt-4.1-mini";
    std::chrono::milliseconds timeout{30000};

    static LlmEndpoint from_env();
};

class Transport {
public:
    virtual ~Transport() = default;
    // Sends one request document, returns the raw response body. Throws
    // Timeout or RemoteError.
    virtual std::string post(const std::string& request_body) = 0;
};

class HttpTransport final : public Transport {
public:
    explicit HttpTransport(LlmEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string post(const std::string& request_body) override;

private:
    LlmEndpoint endpoint_;
};

// Plays back a transcript directory (0001.request.json / 0001.response.json,
// ...) in order. With `strict`, each outgoing request must equal the recorded
// one byte for byte, otherwise RemoteError.
class ReplayTransport final : public Transport {
public:
    explicit ReplayTransport(std::filesystem::path dir, bool strict = true);
    std::string post(const std::string& request_body) override;

    std::size_t remaining() const { return pairs_.size() - next_; }

private:
    struct Pair {
        std::string request;
        std::string response;
    };
    std::vector<Pair> pairs_;
    std::size_t next_ = 0;
    bool strict_;
};

std::string_view system_preamble();

// Chat-completion request for one agent invocation.
nlohmann::json build_request(const AgentContext& ctx, const std::string& model);

// The model's reply document: exactly {"mode", "explanation", "intent"} with
// mode consistent with the intent type. Anything else is ParseFailure.
AgentOutput parse_agent_reply(std::string_view content);
nlohmann::json encode_agent_reply(const AgentOutput& output);

// Unwraps choices[0].message.content from a chat-completion body.
AgentOutput parse_chat_completion(std::string_view body);
nlohmann::json encode_chat_completion(const AgentOutput& output, const std::string& model);

void write_transcript_pair(const std::filesystem::path& dir, std::size_t n,
                           const std::string& request, const std::string& response);

class LlmAgent final : public reasoning::Agent {
public:
    LlmAgent(Transport& transport, std::string model,
             std::optional<std::filesystem::path> transcript_dir = std::nullopt);

    std::string name() const override { return "remote"; }
    AgentOutput analyze(const AgentContext& ctx) override;

private:
    Transport& transport_;
    std::string model_;
    std::optional<std::filesystem::path> transcript_dir_;
    std::size_t calls_ = 0;
};

// Answers like the rule agent but goes through the remote wire format, writing
// each request/response pair; used to build replay fixtures offline.
class TranscriptRecorder final : public reasoning::Agent {
public:
    TranscriptRecorder(reasoning::Agent& inner, std::string model, std::filesystem::path dir);

    std::string name() const override { return "remote"; }
    AgentOutput analyze(const AgentContext& ctx) override;

private:
    reasoning::Agent& inner_;
    std::string model_;
    std::filesystem::path dir_;
    std::size_t calls_ = 0;
};

}  // namespace netanalyzer::agents
