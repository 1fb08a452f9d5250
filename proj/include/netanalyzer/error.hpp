#pragma once

#include <stdexcept>
#include <string>

namespace netanalyzer {

// Base for every failure surfaced by the library. `code` is the stable
// machine-readable name (e.g. "PathNotFound"); `detail` names the offending
// field, path, or id.
class Error : public std::runtime_error {
public:
    Error(std::string code, std::string detail)
        : std::runtime_error(code + (detail.empty() ? "" : ": " + detail)),
          code_(std::move(code)), detail_(std::move(detail)) {}

    const std::string& code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string code_;
    std::string detail_;
};

#define NETANALYZER_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(std::string detail = {}) : Error(#Name, std::move(detail)) {} \
    }

NETANALYZER_DEFINE_ERROR(InvalidScenario);
NETANALYZER_DEFINE_ERROR(InvalidConfig);
NETANALYZER_DEFINE_ERROR(EmptyTrace);
NETANALYZER_DEFINE_ERROR(MalformedEvent);
NETANALYZER_DEFINE_ERROR(QueueFull);
NETANALYZER_DEFINE_ERROR(InvalidQuery);
NETANALYZER_DEFINE_ERROR(UnknownSeries);
NETANALYZER_DEFINE_ERROR(PathNotFound);
NETANALYZER_DEFINE_ERROR(InvalidPath);
NETANALYZER_DEFINE_ERROR(InvalidPatch);
NETANALYZER_DEFINE_ERROR(NotPending);
NETANALYZER_DEFINE_ERROR(UnknownProposal);
NETANALYZER_DEFINE_ERROR(StaleValue);
NETANALYZER_DEFINE_ERROR(NotApproved);
NETANALYZER_DEFINE_ERROR(CycleConflict);
NETANALYZER_DEFINE_ERROR(NotParked);
NETANALYZER_DEFINE_ERROR(CycleFinished);
NETANALYZER_DEFINE_ERROR(CycleParked);
NETANALYZER_DEFINE_ERROR(UnknownCycle);

// Agent backends report every contract violation through this family so the
// orchestrator can retry and escalate uniformly.
class AgentProtocolError : public Error {
public:
    explicit AgentProtocolError(std::string detail)
        : Error("AgentProtocolError", std::move(detail)) {}

protected:
    AgentProtocolError(std::string code, std::string detail)
        : Error(std::move(code), std::move(detail)) {}
};

class ParseFailure : public AgentProtocolError {
public:
    explicit ParseFailure(std::string detail)
        : AgentProtocolError("ParseFailure", std::move(detail)) {}
};

class Timeout : public AgentProtocolError {
public:
    explicit Timeout(std::string detail)
        : AgentProtocolError("Timeout", std::move(detail)) {}
};

class RemoteError : public AgentProtocolError {
public:
    explicit RemoteError(std::string detail)
        : AgentProtocolError("RemoteError", std::move(detail)) {}
};

#undef NETANALYZER_DEFINE_ERROR

}  // namespace netanalyzer
