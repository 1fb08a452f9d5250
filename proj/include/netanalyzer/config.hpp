#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "netanalyzer/audit.hpp"
#include "netanalyzer/clock.hpp"
#include "netanalyzer/ran/a3.hpp"
#include "netanalyzer/ran/radio.hpp"

namespace netanalyzer::config {

enum class Leaf { OffsetDb, HysteresisDb, TttMs };

std::string_view to_string(Leaf leaf);
std::optional<Leaf> leaf_from_string(std::string_view name);

// `gnb/<gnb_id>/cell/<index>/a3/<leaf>`. Cells are numbered 1.. within their
// gNB in ascending cell_id order.
struct ConfigPath {
    int gnb_id = 0;
    int cell_index = 0;
    Leaf leaf = Leaf::OffsetDb;

    auto operator<=>(const ConfigPath&) const = default;

    // Throws InvalidPath.
    static ConfigPath parse(std::string_view text);
    std::string str() const;
};

// Read-side selector: a canonical path, a subtree prefix of one
// (`gnb/30`, `gnb/30/cell/1/a3`), or either with `*` in the id/leaf slots.
struct PathSelector {
    std::optional<int> gnb_id;
    std::optional<int> cell_index;
    std::optional<Leaf> leaf;

    static PathSelector parse(std::string_view text);
    bool matches(const ConfigPath& path) const;
};

// Throws InvalidPatch(path + ": " + reason) if value breaks the leaf's A3 invariant.
void validate_leaf_value(const ConfigPath& path, double value);

nlohmann::json leaf_value_json(Leaf leaf, double value);

struct ConfigEntry {
    ConfigPath path;
    double value = 0.0;
};

struct ConfigRead {
    std::vector<ConfigEntry> entries;
    std::uint64_t version = 0;
};

nlohmann::json to_json(const ConfigRead& read);

struct PatchEntry {
    ConfigPath path;
    double expected_old = 0.0;
    double new_value = 0.0;

    bool operator==(const PatchEntry&) const = default;
};

struct ConfigPatch {
    std::vector<PatchEntry> entries;

    bool operator==(const ConfigPatch&) const = default;
};

nlohmann::json to_json(const ConfigPatch& patch);
// Strict; throws InvalidPatch.
ConfigPatch config_patch_from_json(const nlohmann::json& doc);

enum class ProposalStatus { Pending, Approved, Rejected, Applied, Failed };
std::string_view to_string(ProposalStatus status);

enum class Decision { Approve, Reject };

struct StatusChange {
    ProposalStatus status;
    std::int64_t at_ms = 0;
};

struct Proposal {
    std::string proposal_id;
    ConfigPatch patch;
    std::string rationale;
    std::string cycle_id;
    ProposalStatus status = ProposalStatus::Pending;
    std::vector<StatusChange> transitions;
    std::string decided_by;
    std::string failure;
};

// `timestamps` = false leaves transition times out, for byte-comparable reports.
nlohmann::json to_json(const Proposal& proposal, bool timestamps = true);

struct AppliedEntry {
    ConfigPath path;
    double old_value = 0.0;
    double new_value = 0.0;
    double read_back = 0.0;
};

struct ApplyReport {
    std::string proposal_id;
    std::vector<AppliedEntry> entries;
    std::uint64_t version = 0;
};

nlohmann::json to_json(const ApplyReport& report);

struct VersionChange {
    std::uint64_t version = 0;
    std::string proposal_id;
    std::int64_t at_ms = 0;
};

struct CellBinding {
    int cell_id = 0;
    int gnb_id = 0;
    int cell_index = 0;
};

// Versioned A3 configuration tree with approval-gated, compare-and-swap
// patches. One writer at a time; every public operation below writes exactly
// one audit record, failures included.
class ConfigService {
public:
    using ApplyListener = std::function<void(const ApplyReport&)>;

    ConfigService(const std::vector<ran::CellConfig>& cells, AuditLog& audit,
                  Clock clock = system_clock());

    ConfigService(const ConfigService&) = delete;
    ConfigService& operator=(const ConfigService&) = delete;

    // Restores a tree written by export_json(); the version carries over.
    static std::unique_ptr<ConfigService> from_export(const nlohmann::json& doc, AuditLog& audit,
                                                      Clock clock = system_clock());

    ConfigRead get(const ConfigPath& path, Actor actor = Actor::Agent);
    // Selector read; PathNotFound if nothing matches.
    ConfigRead select(std::string_view selector, Actor actor = Actor::Agent);

    Proposal propose(const ConfigPatch& patch, std::string rationale, std::string cycle_id);
    Proposal decide(const std::string& proposal_id, Decision decision, const std::string& operator_id);
    ApplyReport apply(const std::string& proposal_id);

    Proposal proposal(const std::string& proposal_id) const;
    std::vector<Proposal> proposals() const;
    std::uint64_t version() const;
    std::vector<VersionChange> version_history() const;
    // Audit records of config operations only, in seq order.
    std::vector<AuditRecord> history() const;

    ran::A3Config a3_for_cell(int cell_id) const;
    std::vector<CellBinding> bindings() const;
    ConfigPath path_for(int cell_id, Leaf leaf) const;

    void set_apply_listener(ApplyListener listener);

    nlohmann::json export_json() const;

private:
    ConfigService(AuditLog& audit, Clock clock) : audit_(audit), clock_(std::move(clock)) {}

    void add_cell(int cell_id, int gnb_id, int cell_index, const ran::A3Config& a3);
    Proposal& find_locked(const std::string& proposal_id);
    void transition(Proposal& p, ProposalStatus to);

    AuditLog& audit_;
    Clock clock_;
    mutable std::shared_mutex mu_;
    std::map<ConfigPath, double> tree_;
    std::vector<CellBinding> bindings_;
    std::uint64_t version_ = 0;
    std::vector<VersionChange> versions_;
    std::map<std::string, Proposal> proposals_;
    std::vector<std::string> proposal_order_;
    std::uint64_t next_proposal_ = 1;
    ApplyListener listener_;
};

}  // namespace netanalyzer::config
