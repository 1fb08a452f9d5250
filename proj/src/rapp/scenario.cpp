#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "netanalyzer/error.hpp"
#include "netanalyzer/rapp.hpp"

namespace netanalyzer::rapp {

using nlohmann::json;

void ScenarioSpec::validate() const {
    if (scenario_id.empty()) throw InvalidScenario("scenario_id: empty");
    sim.validate();
    auto preset = [](const ran::A3Config& a3, const char* name) {
        try {
            a3.validate();
        } catch (const InvalidConfig& e) {
            throw InvalidScenario(std::string("a3_presets.") + name + "." + e.detail() +
                                  ": out of range");
        }
    };
    preset(misconfigured, "misconfigured");
    preset(corrected, "corrected");
    if (!(crossing_interval_s[0] < crossing_interval_s[1]))
        throw InvalidScenario("crossing_interval_s: from must be < to");
    if (!(ping_pong_window_s > 0.0)) throw InvalidScenario("ping_pong_window_s: must be > 0");
    try {
        batch_policy.validate();
    } catch (const InvalidConfig& e) {
        throw InvalidScenario("batch_policy." + e.detail() + ": out of range");
    }
    if (iteration_cap < 0) throw InvalidScenario("iteration_cap: negative");
    if (!(replay_speedup > 0.0) || !std::isfinite(replay_speedup))
        throw InvalidScenario("replay_speedup: must be > 0");
}

ran::SimulationSpec ScenarioSpec::with_a3(const ran::A3Config& a3) const {
    ran::SimulationSpec s = sim;
    for (auto& c : s.cells) c.a3 = a3;
    return s;
}

ScenarioSpec reference_scenario() {
    ScenarioSpec spec;
    spec.scenario_id = "reference";
    auto& sim = spec.sim;
    sim.seed = 42;
    sim.radio = {3.0, 4.0, 5.0, 2.0};
    sim.cells = {{30, 30, {0.0, 0.0}, -40.0, spec.misconfigured},
                 {31, 31, {15.0, 0.0}, -40.0, spec.misconfigured}};
    sim.trajectory.ue_id = 17;
    auto& w = sim.trajectory.waypoints;
    w.push_back({0.0, 1.0, 0.5});
    w.push_back({25.0, 5.0, 0.5});
    // Ten crossings of the cell edge (x = 7.5 m) at 1.6 m/s.
    for (int i = 1; i <= 11; ++i) w.push_back({25.0 + 3.125 * i, i % 2 ? 10.0 : 5.0, 0.5});
    w.push_back({74.375, 14.0, 0.5});
    return spec;
}

json to_json(const ScenarioSpec& spec) {
    json cells = json::array();
    for (const auto& c : spec.sim.cells)
        cells.push_back({{"cell_id", c.cell_id},
                         {"gnb_id", c.gnb_id},
                         {"position", {c.position.x, c.position.y}},
                         {"tx_power_ref_dbm", c.tx_power_ref_dbm}});
    json waypoints = json::array();
    for (const auto& w : spec.sim.trajectory.waypoints) waypoints.push_back({w.time_s, w.x_m, w.y_m});
    json doc = {
        {"schema_version", kScenarioSchemaVersion},
        {"scenario_id", spec.scenario_id},
        {"seed", spec.sim.seed},
        {"tick_ms", spec.sim.tick_ms},
        {"ho_execution_delay_ms", spec.sim.ho_execution_delay_ms},
        {"interruption_ms", spec.sim.interruption_ms},
        {"nominal_fps", spec.sim.nominal_fps},
        {"radio",
         {{"path_loss_exponent", spec.sim.radio.path_loss_exponent},
          {"shadowing_sigma_db", spec.sim.radio.shadowing_sigma_db},
          {"decorrelation_m", spec.sim.radio.decorrelation_m},
          {"shadowing_grid_m", spec.sim.radio.shadowing_grid_m}}},
        {"cells", cells},
        {"trajectory", {{"ue_id", spec.sim.trajectory.ue_id}, {"waypoints", waypoints}}},
        {"a3_presets",
         {{"misconfigured", ran::to_json(spec.misconfigured)},
          {"corrected", ran::to_json(spec.corrected)}}},
        {"crossing_interval_s", {spec.crossing_interval_s[0], spec.crossing_interval_s[1]}},
        {"ping_pong_window_s", spec.ping_pong_window_s},
        {"batch_policy",
         {{"quiescence_ms", spec.batch_policy.quiescence_ms},
          {"max_count", spec.batch_policy.max_count}}},
        {"iteration_cap", spec.iteration_cap},
        {"replay_speedup", spec.replay_speedup},
    };
    if (spec.sim.initial_serving_cell) doc["initial_serving_cell"] = *spec.sim.initial_serving_cell;
    return doc;
}

namespace {

// Field accessor that names the full path of whatever is wrong.
class Reader {
public:
    Reader(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
        if (!doc_.is_object()) fail("", "expected an object");
    }

    void only(std::initializer_list<const char*> keys) const {
        for (auto it = doc_.begin(); it != doc_.end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            if (!ok) fail(it.key(), "unknown field");
        }
    }

    bool has(const char* key) const { return doc_.contains(key); }

    const json& at(const char* key) const {
        auto it = doc_.find(key);
        if (it == doc_.end()) fail(key, "missing");
        return *it;
    }

    double number(const char* key) const {
        const json& v = at(key);
        if (!v.is_number() || !std::isfinite(v.get<double>())) fail(key, "expected a number");
        return v.get<double>();
    }

    std::int64_t integer(const char* key) const {
        const json& v = at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<std::int64_t>();
    }

    std::string string(const char* key) const {
        const json& v = at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    const json& array(const char* key) const {
        const json& v = at(key);
        if (!v.is_array()) fail(key, "expected an array");
        return v;
    }

    Reader child(const char* key) const { return Reader(at(key), path(key)); }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    [[noreturn]] void fail(const std::string& key, const std::string& reason) const {
        throw InvalidScenario((key.empty() ? (where_.empty() ? "document" : where_) : path(key)) +
                              ": " + reason);
    }

private:
    const json& doc_;
    std::string where_;
};

std::array<double, 2> pair_of_numbers(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw InvalidScenario(where + ": expected [number, number]");
    return {v[0].get<double>(), v[1].get<double>()};
}

ran::A3Config preset(const Reader& presets, const char* name) {
    Reader r = presets.child(name);
    r.only({"offset_db", "hysteresis_db", "ttt_ms"});
    ran::A3Config a3{r.number("offset_db"), r.number("hysteresis_db"),
                     static_cast<int>(r.integer("ttt_ms"))};
    return a3;
}

}  // namespace

ScenarioSpec scenario_from_json(const json& doc) {
    Reader r(doc, "");
    r.only({"schema_version", "scenario_id", "seed", "tick_ms", "ho_execution_delay_ms",
            "interruption_ms", "nominal_fps", "radio", "cells", "trajectory", "a3_presets",
            "crossing_interval_s", "ping_pong_window_s", "batch_policy", "iteration_cap",
            "replay_speedup", "initial_serving_cell"});
    if (r.integer("schema_version") != kScenarioSchemaVersion)
        r.fail("schema_version", "unsupported version");

    ScenarioSpec spec;
    spec.scenario_id = r.string("scenario_id");
    auto& sim = spec.sim;
    std::int64_t seed = r.integer("seed");
    if (seed < 0) r.fail("seed", "negative");
    sim.seed = static_cast<std::uint64_t>(seed);
    if (r.has("tick_ms")) sim.tick_ms = static_cast<int>(r.integer("tick_ms"));
    if (r.has("ho_execution_delay_ms"))
        sim.ho_execution_delay_ms = static_cast<int>(r.integer("ho_execution_delay_ms"));
    if (r.has("interruption_ms")) sim.interruption_ms = static_cast<int>(r.integer("interruption_ms"));
    if (r.has("nominal_fps")) sim.nominal_fps = r.number("nominal_fps");
    if (r.has("initial_serving_cell"))
        sim.initial_serving_cell = static_cast<int>(r.integer("initial_serving_cell"));

    Reader radio = r.child("radio");
    radio.only({"path_loss_exponent", "shadowing_sigma_db", "decorrelation_m", "shadowing_grid_m"});
    sim.radio.path_loss_exponent = radio.number("path_loss_exponent");
    sim.radio.shadowing_sigma_db = radio.number("shadowing_sigma_db");
    sim.radio.decorrelation_m = radio.number("decorrelation_m");
    if (radio.has("shadowing_grid_m")) sim.radio.shadowing_grid_m = radio.number("shadowing_grid_m");

    Reader presets = r.child("a3_presets");
    presets.only({"misconfigured", "corrected"});
    spec.misconfigured = preset(presets, "misconfigured");
    spec.corrected = preset(presets, "corrected");

    const json& cells = r.array("cells");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        Reader c(cells[i], "cells[" + std::to_string(i) + "]");
        c.only({"cell_id", "gnb_id", "position", "tx_power_ref_dbm"});
        ran::CellConfig cell;
        cell.cell_id = static_cast<int>(c.integer("cell_id"));
        cell.gnb_id = static_cast<int>(c.integer("gnb_id"));
        auto pos = pair_of_numbers(c.at("position"), c.path("position"));
        cell.position = {pos[0], pos[1]};
        cell.tx_power_ref_dbm = c.number("tx_power_ref_dbm");
        cell.a3 = spec.misconfigured;
        sim.cells.push_back(cell);
    }

    Reader traj = r.child("trajectory");
    traj.only({"ue_id", "waypoints"});
    sim.trajectory.ue_id = static_cast<int>(traj.integer("ue_id"));
    const json& wps = traj.array("waypoints");
    for (std::size_t i = 0; i < wps.size(); ++i) {
        const json& w = wps[i];
        std::string where = "trajectory.waypoints[" + std::to_string(i) + "]";
        if (!w.is_array() || w.size() != 3 || !w[0].is_number() || !w[1].is_number() ||
            !w[2].is_number())
            throw InvalidScenario(where + ": expected [time_s, x_m, y_m]");
        sim.trajectory.waypoints.push_back({w[0].get<double>(), w[1].get<double>(), w[2].get<double>()});
    }

    if (r.has("crossing_interval_s"))
        spec.crossing_interval_s = pair_of_numbers(r.at("crossing_interval_s"), "crossing_interval_s");
    if (r.has("ping_pong_window_s")) spec.ping_pong_window_s = r.number("ping_pong_window_s");
    if (r.has("batch_policy")) {
        Reader b = r.child("batch_policy");
        b.only({"quiescence_ms", "max_count"});
        spec.batch_policy.quiescence_ms = b.integer("quiescence_ms");
        std::int64_t max_count = b.integer("max_count");
        if (max_count < 1) b.fail("max_count", "must be >= 1");
        spec.batch_policy.max_count = static_cast<std::size_t>(max_count);
    }
    if (r.has("iteration_cap")) spec.iteration_cap = static_cast<int>(r.integer("iteration_cap"));
    if (r.has("replay_speedup")) spec.replay_speedup = r.number("replay_speedup");

    spec.validate();
    return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidScenario(path.string() + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    json doc = json::parse(ss.str(), nullptr, false);
    if (doc.is_discarded()) throw InvalidScenario(path.string() + ": not valid JSON");
    return scenario_from_json(doc);
}

}  // namespace netanalyzer::rapp
