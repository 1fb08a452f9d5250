#include "netanalyzer/ran/a3.hpp"

#include <algorithm>
#include <cmath>

#include "netanalyzer/error.hpp"
#include "netanalyzer/ran/radio.hpp"

namespace netanalyzer::ran {

bool is_allowed_ttt(int ttt_ms) {
    return std::find(kAllowedTttMs.begin(), kAllowedTttMs.end(), ttt_ms) != kAllowedTttMs.end();
}

bool is_half_db_step(double value_db) {
    if (!std::isfinite(value_db)) return false;
    double doubled = value_db * 2.0;
    return doubled == std::round(doubled);
}

void A3Config::validate() const {
    if (!is_half_db_step(offset_db) || std::abs(offset_db) > kMaxOffsetDb)
        throw InvalidConfig("offset_db");
    if (!is_half_db_step(hysteresis_db) || hysteresis_db < 0.0 ||
        hysteresis_db > kMaxHysteresisDb)
        throw InvalidConfig("hysteresis_db");
    if (!is_allowed_ttt(ttt_ms)) throw InvalidConfig("ttt_ms");
}

nlohmann::json to_json(const A3Config& cfg) {
    return {{"offset_db", cfg.offset_db},
            {"hysteresis_db", cfg.hysteresis_db},
            {"ttt_ms", cfg.ttt_ms}};
}

A3Config a3_config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw InvalidConfig("a3");
    A3Config cfg;
    try {
        cfg.offset_db = doc.at("offset_db").get<double>();
        cfg.hysteresis_db = doc.at("hysteresis_db").get<double>();
        const auto& ttt = doc.at("ttt_ms");
        if (!ttt.is_number_integer()) throw InvalidConfig("ttt_ms");
        cfg.ttt_ms = ttt.get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig(std::string("a3: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::optional<A3Trigger> A3Monitor::observe(double time_s, double diff_db) {
    if (!armed_) {
        if (diff_db < cfg_.leaving_threshold_db()) armed_ = true;
        entered_since_s_.reset();
        return std::nullopt;
    }
    const double threshold = cfg_.entering_threshold_db();
    if (!(diff_db > threshold)) {
        entered_since_s_.reset();
        return std::nullopt;
    }
    if (!entered_since_s_) entered_since_s_ = time_s;
    if (time_s - *entered_since_s_ >= cfg_.ttt_ms / 1000.0 - kTimeEpsilonS) {
        armed_ = false;
        entered_since_s_.reset();
        return A3Trigger{time_s, diff_db - threshold};
    }
    return std::nullopt;
}

void A3Monitor::reset() {
    armed_ = true;
    entered_since_s_.reset();
}

void A3Monitor::set_config(A3Config cfg) {
    cfg.validate();
    cfg_ = cfg;
    reset();
}

std::vector<A3Trigger> evaluate_a3(std::span<const RadioSample> trace, int serving, int neighbor,
                                   const A3Config& cfg) {
    if (trace.empty()) throw EmptyTrace();
    if (serving == neighbor) throw InvalidConfig("serving == neighbor");
    cfg.validate();

    A3Monitor monitor(cfg);
    std::vector<A3Trigger> triggers;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const RadioSample& s = trace[i];
        if (i > 0) {
            double gap = s.time_s - trace[i - 1].time_s;
            if (!(gap > 0.0)) throw InvalidConfig("trace times not strictly increasing");
            if (gap > 0.010 + kTimeEpsilonS) throw InvalidConfig("trace sample period > 10 ms");
        }
        auto p = s.rsrp_dbm.find(serving);
        auto n = s.rsrp_dbm.find(neighbor);
        if (p == s.rsrp_dbm.end() || n == s.rsrp_dbm.end())
            throw InvalidConfig("sample missing serving or neighbor cell");
        if (auto t = monitor.observe(s.time_s, n->second - p->second)) triggers.push_back(*t);
    }
    return triggers;
}

}  // namespace netanalyzer::ran
