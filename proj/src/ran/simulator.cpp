#include "netanalyzer/ran/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "netanalyzer/error.hpp"

namespace netanalyzer::ran {

using events::EventKind;
using events::NormalizedEvent;

void UETrajectory::validate() const {
    if (waypoints.size() < 2) throw InvalidScenario("trajectory.waypoints: need at least 2");
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
        const auto& w = waypoints[i];
        if (!std::isfinite(w.time_s) || !std::isfinite(w.x_m) || !std::isfinite(w.y_m))
            throw InvalidScenario("trajectory.waypoints[" + std::to_string(i) + "]: not finite");
        if (i > 0 && !(w.time_s > waypoints[i - 1].time_s))
            throw InvalidScenario("trajectory.waypoints[" + std::to_string(i) +
                                  "]: times must be strictly increasing");
    }
    if (waypoints.front().time_s < 0.0)
        throw InvalidScenario("trajectory.waypoints[0]: negative time");
}

Vec2 UETrajectory::position_at(double t) const {
    if (t <= waypoints.front().time_s) return {waypoints.front().x_m, waypoints.front().y_m};
    if (t >= waypoints.back().time_s) return {waypoints.back().x_m, waypoints.back().y_m};
    auto hi = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                               [](double v, const Waypoint& w) { return v < w.time_s; });
    auto lo = hi - 1;
    double f = (t - lo->time_s) / (hi->time_s - lo->time_s);
    return {lo->x_m + f * (hi->x_m - lo->x_m), lo->y_m + f * (hi->y_m - lo->y_m)};
}

nlohmann::json to_json(const HandoverRecord& r) {
    return {{"time_s", r.time_s},
            {"ue_id", r.ue_id},
            {"source_cell", r.source_cell},
            {"target_cell", r.target_cell},
            {"outcome", r.outcome == HandoverOutcome::Success ? "SUCCESS" : "FAILURE"},
            {"trigger_margin_db", r.trigger_margin_db}};
}

nlohmann::json to_json(const FpsTrace& trace) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : trace.samples) samples.push_back({s.second_index, s.fps});
    return {{"nominal_fps", trace.nominal_fps}, {"samples", std::move(samples)}};
}

void SimulationSpec::validate() const {
    if (cells.empty()) throw InvalidScenario("cells: empty");
    std::set<int> ids;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        std::string where = "cells[" + std::to_string(i) + "]";
        if (!ids.insert(c.cell_id).second) throw InvalidScenario(where + ".cell_id: duplicate");
        if (!std::isfinite(c.tx_power_ref_dbm))
            throw InvalidScenario(where + ".tx_power_ref_dbm: not finite");
        if (!std::isfinite(c.position.x) || !std::isfinite(c.position.y))
            throw InvalidScenario(where + ".position: not finite");
        try {
            c.a3.validate();
        } catch (const InvalidConfig& e) {
            throw InvalidScenario(where + ".a3." + e.detail() + ": out of range");
        }
    }
    trajectory.validate();
    if (!(radio.path_loss_exponent > 0.0) || !std::isfinite(radio.path_loss_exponent))
        throw InvalidScenario("radio.path_loss_exponent: must be > 0");
    if (!(radio.shadowing_sigma_db >= 0.0) || !std::isfinite(radio.shadowing_sigma_db))
        throw InvalidScenario("radio.shadowing_sigma_db: must be >= 0");
    if (!(radio.decorrelation_m > 0.0) || !std::isfinite(radio.decorrelation_m))
        throw InvalidScenario("radio.decorrelation_m: must be > 0");
    if (!(radio.shadowing_grid_m > 0.0) || !std::isfinite(radio.shadowing_grid_m))
        throw InvalidScenario("radio.shadowing_grid_m: must be > 0");
    if (tick_ms < 1 || tick_ms > 10) throw InvalidScenario("tick_ms: must be in [1, 10]");
    if (ho_execution_delay_ms < 0) throw InvalidScenario("ho_execution_delay_ms: negative");
    if (interruption_ms < 0) throw InvalidScenario("interruption_ms: negative");
    if (!(nominal_fps > 0.0) || !std::isfinite(nominal_fps))
        throw InvalidScenario("nominal_fps: must be > 0");
    if (initial_serving_cell && !ids.contains(*initial_serving_cell))
        throw InvalidScenario("initial_serving_cell: unknown cell");
}

const CellConfig& SimulationSpec::cell(int cell_id) const {
    for (const auto& c : cells)
        if (c.cell_id == cell_id) return c;
    throw InvalidScenario("unknown cell " + std::to_string(cell_id));
}

namespace {

class Simulation {
public:
    explicit Simulation(const SimulationSpec& spec)
        : spec_(spec),
          shadowing_(cell_ids(spec), trajectory_bounds(spec.trajectory),
                     spec.radio.shadowing_sigma_db, spec.radio.decorrelation_m,
                     spec.radio.shadowing_grid_m, spec.seed) {}

    ScenarioOutput run() {
        const auto& traj = spec_.trajectory;
        const std::int64_t start_ms = std::llround(traj.start_s() * 1000.0);
        const std::int64_t end_ms = std::llround(traj.end_s() * 1000.0);
        const std::int64_t ticks = (end_ms - start_ms) / spec_.tick_ms;

        for (std::int64_t k = 0; k <= ticks; ++k) {
            const std::int64_t now_ms = start_ms + k * spec_.tick_ms;
            const double t = static_cast<double>(now_ms) / 1000.0;
            Vec2 pos = traj.position_at(t);

            RadioSample sample{t, {}};
            for (const auto& c : spec_.cells)
                sample.rsrp_dbm[c.cell_id] = compute_rsrp(c, pos, spec_.radio.path_loss_exponent,
                                                          shadowing_.value(c.cell_id, pos));
            out_.radio.push_back(sample);

            if (k == 0) attach(initial_serving(sample));

            if (pending_ && now_ms >= pending_->complete_ms) {
                complete_handover(sample);
                continue;
            }
            if (!pending_) evaluate(sample, now_ms);
        }

        std::vector<HandoverRecord> relative = out_.handovers;
        for (auto& h : relative) h.time_s -= traj.start_s();
        out_.fps = compute_fps(relative, traj.end_s() - traj.start_s(), spec_.nominal_fps,
                               spec_.interruption_ms);
        return std::move(out_);
    }

private:
    struct PendingHandover {
        std::int64_t complete_ms;
        int target;
        double margin_db;
    };

    static Bounds trajectory_bounds(const UETrajectory& traj) {
        Bounds b{{traj.waypoints.front().x_m, traj.waypoints.front().y_m},
                 {traj.waypoints.front().x_m, traj.waypoints.front().y_m}};
        for (const auto& w : traj.waypoints) {
            b.min.x = std::min(b.min.x, w.x_m);
            b.min.y = std::min(b.min.y, w.y_m);
            b.max.x = std::max(b.max.x, w.x_m);
            b.max.y = std::max(b.max.y, w.y_m);
        }
        return b;
    }

    static std::vector<int> cell_ids(const SimulationSpec& spec) {
        std::vector<int> ids;
        for (const auto& c : spec.cells) ids.push_back(c.cell_id);
        return ids;
    }

    int initial_serving(const RadioSample& sample) const {
        if (spec_.initial_serving_cell) return *spec_.initial_serving_cell;
        int best = spec_.cells.front().cell_id;
        for (const auto& [id, dbm] : sample.rsrp_dbm)
            if (dbm > sample.rsrp_dbm.at(best)) best = id;
        return best;
    }

    void attach(int serving) {
        serving_ = serving;
        monitors_.clear();
        const A3Config& cfg = spec_.cell(serving).a3;
        for (const auto& c : spec_.cells)
            if (c.cell_id != serving) monitors_.emplace(c.cell_id, A3Monitor(cfg));
    }

    void evaluate(const RadioSample& sample, std::int64_t now_ms) {
        const double serving_dbm = sample.rsrp_dbm.at(serving_);
        std::optional<std::pair<int, A3Trigger>> best;
        for (auto& [neighbor, monitor] : monitors_) {
            auto trig = monitor.observe(sample.time_s, sample.rsrp_dbm.at(neighbor) - serving_dbm);
            if (trig && (!best || trig->trigger_margin_db > best->second.trigger_margin_db))
                best = std::make_pair(neighbor, *trig);
        }
        if (!best) return;

        const int target = best->first;
        NormalizedEvent trigger = make_event(EventKind::A3Trigger, sample, serving_, target);
        trigger.trigger_margin_db = best->second.trigger_margin_db;
        out_.trigger_configs[trigger.event_id] = spec_.cell(serving_).a3;
        out_.events.push_back(std::move(trigger));
        out_.events.push_back(make_event(EventKind::HoAttempt, sample, serving_, target));

        pending_ = PendingHandover{now_ms + spec_.ho_execution_delay_ms, target,
                                   best->second.trigger_margin_db};
        if (spec_.ho_execution_delay_ms == 0) complete_handover(sample);
    }

    void complete_handover(const RadioSample& sample) {
        const int source = serving_;
        const int target = pending_->target;
        out_.events.push_back(make_event(EventKind::HoSuccess, sample, source, target));
        out_.handovers.push_back({sample.time_s, spec_.trajectory.ue_id, source, target,
                                  HandoverOutcome::Success, pending_->margin_db});
        pending_.reset();
        attach(target);
    }

    NormalizedEvent make_event(EventKind kind, const RadioSample& sample, int source,
                               int target) {
        char id[48];
        std::snprintf(id, sizeof id, "ue%d-%06u", spec_.trajectory.ue_id, ++event_seq_);
        NormalizedEvent e;
        e.event_id = id;
        e.time_s = sample.time_s;
        e.ue_id = spec_.trajectory.ue_id;
        e.kind = kind;
        e.source_cell = source;
        e.target_cell = target;
        e.rsrp_serving_dbm = sample.rsrp_dbm.at(source);
        e.rsrp_neighbor_dbm = sample.rsrp_dbm.at(target);
        return e;
    }

    const SimulationSpec& spec_;
    ShadowingField shadowing_;
    ScenarioOutput out_;
    int serving_ = 0;
    std::map<int, A3Monitor> monitors_;
    std::optional<PendingHandover> pending_;
    unsigned event_seq_ = 0;
};

}  // namespace

ScenarioOutput run_scenario(const SimulationSpec& spec) {
    spec.validate();
    return Simulation(spec).run();
}

std::vector<events::RawEvent> to_raw_events(const ScenarioOutput& output) {
    std::vector<events::RawEvent> raws;
    raws.reserve(output.events.size());
    for (const auto& e : output.events) {
        events::RawEvent raw;
        raw.source = events::EventSource::Sim;
        raw.received_at_ms = std::llround(e.time_s * 1000.0);
        raw.payload = events::to_wire(e);
        if (auto it = output.trigger_configs.find(e.event_id); it != output.trigger_configs.end()) {
            raw.payload.erase("trigger_margin_db");
            raw.payload["a3"] = to_json(it->second);
        }
        raws.push_back(std::move(raw));
    }
    return raws;
}

std::size_t count_ping_pongs(std::span<const HandoverRecord> handovers, double window_s) {
    std::vector<bool> used(handovers.size(), false);
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < handovers.size(); ++i) {
        if (used[i]) continue;
        const auto& first = handovers[i];
        for (std::size_t j = i + 1; j < handovers.size(); ++j) {
            const auto& second = handovers[j];
            double dt = second.time_s - first.time_s;
            if (dt > window_s) break;
            if (used[j] || second.ue_id != first.ue_id) continue;
            if (dt > 0.0 && second.source_cell == first.target_cell &&
                second.target_cell == first.source_cell) {
                used[i] = used[j] = true;
                ++pairs;
                break;
            }
        }
    }
    return pairs;
}

std::vector<HandoverRecord> handovers_between(std::span<const HandoverRecord> handovers,
                                              double from_s, double to_s) {
    std::vector<HandoverRecord> out;
    for (const auto& h : handovers)
        if (h.time_s >= from_s && h.time_s <= to_s) out.push_back(h);
    return out;
}

FpsTrace compute_fps(std::span<const HandoverRecord> handovers, double duration_s,
                     double nominal_fps, int interruption_ms) {
    if (!(duration_s >= 1.0)) throw InvalidScenario("duration_s: must be >= 1");
    const auto seconds = static_cast<std::size_t>(std::ceil(duration_s - kTimeEpsilonS));
    const double blank_s = interruption_ms / 1000.0;

    std::vector<std::pair<double, double>> intervals;
    for (const auto& h : handovers) intervals.emplace_back(h.time_s, h.time_s + blank_s);
    std::sort(intervals.begin(), intervals.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& iv : intervals) {
        if (!merged.empty() && iv.first <= merged.back().second)
            merged.back().second = std::max(merged.back().second, iv.second);
        else
            merged.push_back(iv);
    }

    std::vector<double> blanked(seconds, 0.0);
    for (const auto& [lo, hi] : merged) {
        if (hi <= lo) continue;
        auto k0 = static_cast<long>(std::floor(lo));
        auto k1 = static_cast<long>(std::ceil(hi));
        for (long k = std::max(k0, 0L); k < k1 && k < static_cast<long>(seconds); ++k) {
            double overlap = std::min(hi, k + 1.0) - std::max(lo, static_cast<double>(k));
            if (overlap > 0.0) blanked[static_cast<std::size_t>(k)] += overlap;
        }
    }

    FpsTrace trace;
    trace.nominal_fps = nominal_fps;
    trace.samples.reserve(seconds);
    for (std::size_t k = 0; k < seconds; ++k) {
        double fraction = std::clamp(blanked[k], 0.0, 1.0);
        trace.samples.push_back({static_cast<int>(k), std::max(0.0, nominal_fps * (1.0 - fraction))});
    }
    return trace;
}

}  // namespace netanalyzer::ran
