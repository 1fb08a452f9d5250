#include "netanalyzer/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <mutex>
#include <set>

#include "netanalyzer/digest.hpp"
#include "netanalyzer/error.hpp"

namespace netanalyzer::config {

using nlohmann::json;

namespace {

constexpr double kValueEps = 1e-9;

std::vector<std::string_view> split(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto slash = text.find('/', start);
        out.push_back(text.substr(start, slash - start));
        if (slash == std::string_view::npos) break;
        start = slash + 1;
    }
    return out;
}

// Canonical positive decimal only, so that parse/print round-trips.
std::optional<int> parse_id(std::string_view s) {
    if (s.empty() || s.size() > 9 || s.front() == '0') return std::nullopt;
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v <= 0) return std::nullopt;
    return v;
}

bool same_value(double a, double b) { return std::fabs(a - b) <= kValueEps; }

}  // namespace

std::string_view to_string(Leaf leaf) {
    switch (leaf) {
    case Leaf::OffsetDb: return "offset-db";
    case Leaf::HysteresisDb: return "hysteresis-db";
    case Leaf::TttMs: return "ttt-ms";
    }
    return "ttt-ms";
}

std::optional<Leaf> leaf_from_string(std::string_view name) {
    for (auto l : {Leaf::OffsetDb, Leaf::HysteresisDb, Leaf::TttMs})
        if (to_string(l) == name) return l;
    return std::nullopt;
}

ConfigPath ConfigPath::parse(std::string_view text) {
    auto parts = split(text);
    if (parts.size() != 6 || parts[0] != "gnb" || parts[2] != "cell" || parts[4] != "a3")
        throw InvalidPath(std::string(text));
    auto gnb = parse_id(parts[1]);
    auto cell = parse_id(parts[3]);
    auto leaf = leaf_from_string(parts[5]);
    if (!gnb || !cell || !leaf) throw InvalidPath(std::string(text));
    return {*gnb, *cell, *leaf};
}

std::string ConfigPath::str() const {
    return "gnb/" + std::to_string(gnb_id) + "/cell/" + std::to_string(cell_index) + "/a3/" +
           std::string(to_string(leaf));
}

PathSelector PathSelector::parse(std::string_view text) {
    auto parts = split(text);
    static constexpr std::string_view fixed[] = {"gnb", "", "cell", "", "a3", ""};
    if (parts.empty() || parts.size() > 6) throw InvalidPath(std::string(text));
    PathSelector sel;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::string_view p = parts[i];
        switch (i) {
        case 1:
        case 3: {
            if (p == "*") break;
            auto id = parse_id(p);
            if (!id) throw InvalidPath(std::string(text));
            (i == 1 ? sel.gnb_id : sel.cell_index) = *id;
            break;
        }
        case 5: {
            if (p == "*") break;
            auto leaf = leaf_from_string(p);
            if (!leaf) throw InvalidPath(std::string(text));
            sel.leaf = *leaf;
            break;
        }
        default:
            if (p != fixed[i]) throw InvalidPath(std::string(text));
        }
    }
    return sel;
}

bool PathSelector::matches(const ConfigPath& path) const {
    return (!gnb_id || *gnb_id == path.gnb_id) && (!cell_index || *cell_index == path.cell_index) &&
           (!leaf || *leaf == path.leaf);
}

void validate_leaf_value(const ConfigPath& path, double value) {
    auto fail = [&](const char* reason) { throw InvalidPatch(path.str() + ": " + reason); };
    if (!std::isfinite(value)) fail("not finite");
    switch (path.leaf) {
    case Leaf::OffsetDb:
        if (std::fabs(value) > ran::kMaxOffsetDb) fail("offset outside [-15, 15] dB");
        if (!ran::is_half_db_step(value)) fail("not a multiple of 0.5 dB");
        break;
    case Leaf::HysteresisDb:
        if (value < 0.0 || value > ran::kMaxHysteresisDb) fail("hysteresis outside [0, 15] dB");
        if (!ran::is_half_db_step(value)) fail("not a multiple of 0.5 dB");
        break;
    case Leaf::TttMs:
        if (value != std::floor(value) || !ran::is_allowed_ttt(static_cast<int>(value)))
            fail("time-to-trigger not in the allowed set");
        break;
    }
}

json leaf_value_json(Leaf leaf, double value) {
    if (leaf == Leaf::TttMs) return static_cast<int>(std::lround(value));
    return value;
}

json to_json(const ConfigRead& read) {
    json entries = json::array();
    for (const auto& e : read.entries)
        entries.push_back({{"path", e.path.str()}, {"value", leaf_value_json(e.path.leaf, e.value)}});
    return {{"entries", entries}, {"version", read.version}};
}

json to_json(const ConfigPatch& patch) {
    json entries = json::array();
    for (const auto& e : patch.entries)
        entries.push_back({{"path", e.path.str()},
                           {"expected_old", leaf_value_json(e.path.leaf, e.expected_old)},
                           {"new", leaf_value_json(e.path.leaf, e.new_value)}});
    return {{"entries", entries}};
}

ConfigPatch config_patch_from_json(const json& doc) {
    if (!doc.is_object() || doc.size() != 1 || !doc.contains("entries") || !doc["entries"].is_array())
        throw InvalidPatch("entries");
    ConfigPatch patch;
    for (const auto& e : doc["entries"]) {
        if (!e.is_object() || e.size() != 3 || !e.contains("path") || !e["path"].is_string() ||
            !e.contains("expected_old") || !e["expected_old"].is_number() || !e.contains("new") ||
            !e["new"].is_number())
            throw InvalidPatch("entry: expected {path, expected_old, new}");
        ConfigPath path;
        try {
            path = ConfigPath::parse(e["path"].get<std::string>());
        } catch (const InvalidPath& err) {
            throw InvalidPatch(err.detail() + ": invalid path");
        }
        patch.entries.push_back({path, e["expected_old"].get<double>(), e["new"].get<double>()});
    }
    return patch;
}

std::string_view to_string(ProposalStatus status) {
    switch (status) {
    case ProposalStatus::Pending: return "PENDING";
    case ProposalStatus::Approved: return "APPROVED";
    case ProposalStatus::Rejected: return "REJECTED";
    case ProposalStatus::Applied: return "APPLIED";
    case ProposalStatus::Failed: return "FAILED";
    }
    return "FAILED";
}

json to_json(const Proposal& p, bool timestamps) {
    json doc = {
        {"proposal_id", p.proposal_id},
        {"status", to_string(p.status)},
        {"rationale", p.rationale},
        {"cycle_id", p.cycle_id},
        {"entries", to_json(p.patch)["entries"]},
        {"decided_by", p.decided_by},
    };
    if (!p.failure.empty()) doc["failure"] = p.failure;
    json transitions = json::array();
    for (const auto& t : p.transitions) {
        json tj = {{"status", to_string(t.status)}};
        if (timestamps) tj["at_ms"] = t.at_ms;
        transitions.push_back(tj);
    }
    doc["transitions"] = transitions;
    return doc;
}

json to_json(const ApplyReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"path", e.path.str()},
                           {"old", leaf_value_json(e.path.leaf, e.old_value)},
                           {"new", leaf_value_json(e.path.leaf, e.new_value)},
                           {"read_back", leaf_value_json(e.path.leaf, e.read_back)}});
    return {{"proposal_id", r.proposal_id}, {"entries", entries}, {"version", r.version}};
}

ConfigService::ConfigService(const std::vector<ran::CellConfig>& cells, AuditLog& audit, Clock clock)
    : audit_(audit), clock_(std::move(clock)) {
    std::map<int, std::vector<const ran::CellConfig*>> by_gnb;
    std::set<int> ids;
    for (const auto& c : cells) {
        if (!ids.insert(c.cell_id).second)
            throw InvalidConfig("cell_id " + std::to_string(c.cell_id) + " duplicated");
        c.a3.validate();
        by_gnb[c.gnb_id].push_back(&c);
    }
    for (auto& [gnb, list] : by_gnb) {
        std::sort(list.begin(), list.end(),
                  [](auto* a, auto* b) { return a->cell_id < b->cell_id; });
        int index = 0;
        for (const auto* c : list) add_cell(c->cell_id, gnb, ++index, c->a3);
    }
}

void ConfigService::add_cell(int cell_id, int gnb_id, int cell_index, const ran::A3Config& a3) {
    bindings_.push_back({cell_id, gnb_id, cell_index});
    tree_[{gnb_id, cell_index, Leaf::OffsetDb}] = a3.offset_db;
    tree_[{gnb_id, cell_index, Leaf::HysteresisDb}] = a3.hysteresis_db;
    tree_[{gnb_id, cell_index, Leaf::TttMs}] = a3.ttt_ms;
}

std::unique_ptr<ConfigService> ConfigService::from_export(const json& doc, AuditLog& audit,
                                                          Clock clock) {
    std::unique_ptr<ConfigService> svc(new ConfigService(audit, std::move(clock)));
    try {
        if (doc.at("schema_version").get<int>() != 1) throw InvalidConfig("schema_version");
        svc->version_ = doc.at("version").get<std::uint64_t>();
        for (const auto& [gnb_key, gnb] : doc.at("gnb").items()) {
            int gnb_id = std::stoi(gnb_key);
            for (const auto& [cell_key, cell] : gnb.at("cell").items()) {
                const json& a3 = cell.at("a3");
                ran::A3Config cfg{a3.at("offset-db").get<double>(), a3.at("hysteresis-db").get<double>(),
                                  a3.at("ttt-ms").get<int>()};
                cfg.validate();
                svc->add_cell(cell.at("cell_id").get<int>(), gnb_id, std::stoi(cell_key), cfg);
            }
        }
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("config export: ") + e.what());
    } catch (const std::logic_error& e) {
        throw InvalidConfig(std::string("config export: ") + e.what());
    }
    return svc;
}

json ConfigService::export_json() const {
    std::shared_lock lock(mu_);
    json gnbs = json::object();
    for (const auto& b : bindings_) {
        json a3 = json::object();
        for (auto leaf : {Leaf::OffsetDb, Leaf::HysteresisDb, Leaf::TttMs})
            a3[std::string(to_string(leaf))] =
                leaf_value_json(leaf, tree_.at({b.gnb_id, b.cell_index, leaf}));
        gnbs[std::to_string(b.gnb_id)]["cell"][std::to_string(b.cell_index)] = {
            {"cell_id", b.cell_id}, {"a3", a3}};
    }
    return {{"schema_version", 1}, {"version", version_}, {"gnb", gnbs}};
}

ConfigRead ConfigService::get(const ConfigPath& path, Actor actor) {
    std::shared_lock lock(mu_);
    auto it = tree_.find(path);
    if (it == tree_.end()) {
        audit_.append(actor, AuditAction::ConfigRead, path.str(), digest_text(path.str()), {},
                      "PathNotFound");
        throw PathNotFound(path.str());
    }
    ConfigRead read{{{path, it->second}}, version_};
    audit_.append(actor, AuditAction::ConfigRead, path.str(), digest_text(path.str()),
                  digest(to_json(read)));
    return read;
}

ConfigRead ConfigService::select(std::string_view selector, Actor actor) {
    std::string subject(selector);
    PathSelector sel;
    try {
        sel = PathSelector::parse(selector);
    } catch (const InvalidPath&) {
        audit_.append(actor, AuditAction::ConfigRead, subject, digest_text(subject), {},
                      "InvalidPath");
        throw;
    }
    std::shared_lock lock(mu_);
    ConfigRead read;
    read.version = version_;
    for (const auto& [path, value] : tree_)
        if (sel.matches(path)) read.entries.push_back({path, value});
    if (read.entries.empty()) {
        audit_.append(actor, AuditAction::ConfigRead, subject, digest_text(subject), {},
                      "PathNotFound");
        throw PathNotFound(subject);
    }
    audit_.append(actor, AuditAction::ConfigRead, subject, digest_text(subject),
                  digest(to_json(read)));
    return read;
}

void ConfigService::transition(Proposal& p, ProposalStatus to) {
    p.status = to;
    p.transitions.push_back({to, clock_()});
}

Proposal& ConfigService::find_locked(const std::string& proposal_id) {
    auto it = proposals_.find(proposal_id);
    if (it == proposals_.end()) throw UnknownProposal(proposal_id);
    return it->second;
}

Proposal ConfigService::propose(const ConfigPatch& patch, std::string rationale,
                                std::string cycle_id) {
    std::unique_lock lock(mu_);
    const std::string request = digest(to_json(patch));
    try {
        if (patch.entries.empty()) throw InvalidPatch("empty");
        std::set<ConfigPath> seen;
        for (const auto& e : patch.entries) {
            if (!tree_.contains(e.path)) throw InvalidPatch(e.path.str() + ": unknown path");
            if (!seen.insert(e.path).second) throw InvalidPatch(e.path.str() + ": duplicate path");
            if (!std::isfinite(e.expected_old))
                throw InvalidPatch(e.path.str() + ": expected_old not finite");
            validate_leaf_value(e.path, e.new_value);
            if (same_value(e.expected_old, e.new_value))
                throw InvalidPatch(e.path.str() + ": no change");
        }
    } catch (const InvalidPatch&) {
        audit_.append(Actor::Agent, AuditAction::Propose, cycle_id, request, {}, "InvalidPatch");
        throw;
    }

    Proposal p;
    p.proposal_id = "prop-" + std::to_string(next_proposal_++);
    p.patch = patch;
    p.rationale = std::move(rationale);
    p.cycle_id = std::move(cycle_id);
    transition(p, ProposalStatus::Pending);
    proposals_.emplace(p.proposal_id, p);
    proposal_order_.push_back(p.proposal_id);
    audit_.append(Actor::Agent, AuditAction::Propose, p.proposal_id, request,
                  digest(to_json(p, false)));
    return p;
}

Proposal ConfigService::decide(const std::string& proposal_id, Decision decision,
                               const std::string& operator_id) {
    std::unique_lock lock(mu_);
    const std::string request =
        digest(json{{"decision", decision == Decision::Approve ? "APPROVE" : "REJECT"},
                    {"operator", operator_id}});
    auto it = proposals_.find(proposal_id);
    if (it == proposals_.end()) {
        audit_.append(Actor::Operator, AuditAction::Decide, proposal_id, request, {},
                      "UnknownProposal");
        throw UnknownProposal(proposal_id);
    }
    Proposal& p = it->second;
    if (p.status != ProposalStatus::Pending) {
        audit_.append(Actor::Operator, AuditAction::Decide, proposal_id, request, {}, "NotPending");
        throw NotPending(proposal_id + " is " + std::string(to_string(p.status)));
    }
    p.decided_by = operator_id;
    transition(p, decision == Decision::Approve ? ProposalStatus::Approved : ProposalStatus::Rejected);
    audit_.append(Actor::Operator, AuditAction::Decide, proposal_id, request,
                  digest(to_json(p, false)));
    return p;
}

ApplyReport ConfigService::apply(const std::string& proposal_id) {
    ApplyReport report;
    ApplyListener listener;
    {
        std::unique_lock lock(mu_);
        const std::string request = digest_text(proposal_id);
        auto it = proposals_.find(proposal_id);
        if (it == proposals_.end()) {
            audit_.append(Actor::Orchestrator, AuditAction::Apply, proposal_id, request, {},
                          "UnknownProposal");
            throw UnknownProposal(proposal_id);
        }
        Proposal& p = it->second;
        if (p.status != ProposalStatus::Approved) {
            audit_.append(Actor::Orchestrator, AuditAction::Apply, proposal_id, request, {},
                          "NotApproved");
            throw NotApproved(proposal_id + " is " + std::string(to_string(p.status)));
        }
        for (const auto& e : p.patch.entries) {
            auto cur = tree_.find(e.path);
            if (cur == tree_.end() || !same_value(cur->second, e.expected_old)) {
                p.failure = "StaleValue: " + e.path.str();
                transition(p, ProposalStatus::Failed);
                audit_.append(Actor::Orchestrator, AuditAction::Apply, proposal_id, request, {},
                              "StaleValue");
                throw StaleValue(e.path.str());
            }
        }
        report.proposal_id = proposal_id;
        for (const auto& e : p.patch.entries) {
            double old = tree_[e.path];
            tree_[e.path] = e.new_value;
            report.entries.push_back({e.path, old, e.new_value, 0.0});
        }
        ++version_;
        report.version = version_;
        versions_.push_back({version_, proposal_id, clock_()});
        for (auto& e : report.entries) e.read_back = tree_.at(e.path);
        transition(p, ProposalStatus::Applied);
        audit_.append(Actor::Orchestrator, AuditAction::Apply, proposal_id, request,
                      digest(to_json(report)));
        listener = listener_;
    }
    if (listener) listener(report);
    return report;
}

Proposal ConfigService::proposal(const std::string& proposal_id) const {
    std::shared_lock lock(mu_);
    auto it = proposals_.find(proposal_id);
    if (it == proposals_.end()) throw UnknownProposal(proposal_id);
    return it->second;
}

std::vector<Proposal> ConfigService::proposals() const {
    std::shared_lock lock(mu_);
    std::vector<Proposal> out;
    for (const auto& id : proposal_order_) out.push_back(proposals_.at(id));
    return out;
}

std::uint64_t ConfigService::version() const {
    std::shared_lock lock(mu_);
    return version_;
}

std::vector<VersionChange> ConfigService::version_history() const {
    std::shared_lock lock(mu_);
    return versions_;
}

std::vector<AuditRecord> ConfigService::history() const {
    std::vector<AuditRecord> out;
    for (auto& r : audit_.records()) {
        switch (r.action) {
        case AuditAction::ConfigRead:
        case AuditAction::Propose:
        case AuditAction::Decide:
        case AuditAction::Apply: out.push_back(std::move(r)); break;
        default: break;
        }
    }
    return out;
}

ran::A3Config ConfigService::a3_for_cell(int cell_id) const {
    std::shared_lock lock(mu_);
    for (const auto& b : bindings_) {
        if (b.cell_id != cell_id) continue;
        return {tree_.at({b.gnb_id, b.cell_index, Leaf::OffsetDb}),
                tree_.at({b.gnb_id, b.cell_index, Leaf::HysteresisDb}),
                static_cast<int>(std::lround(tree_.at({b.gnb_id, b.cell_index, Leaf::TttMs})))};
    }
    throw PathNotFound("cell " + std::to_string(cell_id));
}

std::vector<CellBinding> ConfigService::bindings() const {
    std::shared_lock lock(mu_);
    return bindings_;
}

ConfigPath ConfigService::path_for(int cell_id, Leaf leaf) const {
    std::shared_lock lock(mu_);
    for (const auto& b : bindings_)
        if (b.cell_id == cell_id) return {b.gnb_id, b.cell_index, leaf};
    throw PathNotFound("cell " + std::to_string(cell_id));
}

void ConfigService::set_apply_listener(ApplyListener listener) {
    std::unique_lock lock(mu_);
    listener_ = std::move(listener);
}

}  // namespace netanalyzer::config
