#pragma once
// Independent reference implementations the library is checked against.
// Deliberately naive: they rescan instead of keeping incremental state.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "netanalyzer/ran/a3.hpp"
#include "netanalyzer/ran/radio.hpp"

namespace oracle {

using netanalyzer::ran::A3Config;
using netanalyzer::ran::A3Trigger;
using netanalyzer::ran::RadioSample;

// At every armed sample i, walk back to the first sample of the current
// run of "entering condition true" (never crossing the last re-arm/trigger
// barrier) and trigger when that run spans the time-to-trigger.
inline std::vector<A3Trigger> a3_held_window(const std::vector<RadioSample>& trace, int serving,
                                             int neighbor, const A3Config& cfg) {
    const double enter = cfg.offset_db + cfg.hysteresis_db;
    const double leave = cfg.offset_db - cfg.hysteresis_db;
    const double ttt = cfg.ttt_ms / 1000.0;
    auto diff = [&](std::size_t k) { return trace[k].rsrp_dbm.at(neighbor) - trace[k].rsrp_dbm.at(serving); };

    std::vector<A3Trigger> out;
    bool armed = true;
    std::size_t barrier = 0;  // first index a run may start at
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (!armed) {
            if (diff(i) < leave) armed = true;
            barrier = i + 1;
            continue;
        }
        if (!(diff(i) > enter)) continue;
        std::size_t j = i;
        while (j > barrier && diff(j - 1) > enter) --j;
        bool held = true;
        for (std::size_t k = j; k <= i; ++k) held = held && diff(k) > enter;
        if (held && trace[i].time_s - trace[j].time_s >= ttt - 1e-6) {
            out.push_back({trace[i].time_s, diff(i) - enter});
            armed = false;
            barrier = i + 1;
        }
    }
    return out;
}

inline const std::vector<double>& offsets() {
    static const std::vector<double> v = [] {
        std::vector<double> o;
        for (int k = -30; k <= 30; ++k) o.push_back(k * 0.5);
        return o;
    }();
    return v;
}

inline A3Config random_a3(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> off(-12, 12), hys(0, 12);
    std::uniform_int_distribution<std::size_t> ttt(0, netanalyzer::ran::kAllowedTttMs.size() - 1);
    return {off(rng) * 0.5, hys(rng) * 0.5, netanalyzer::ran::kAllowedTttMs[ttt(rng)]};
}

// Random-walk neighbor-minus-serving difference, sometimes snapped to the
// 0.5 dB grid so that samples land exactly on the thresholds. Sample gaps
// vary in [1, 10] ms.
inline std::vector<RadioSample> random_trace(std::mt19937_64& rng, std::size_t n, int serving = 30,
                                             int neighbor = 31) {
    std::uniform_int_distribution<int> gap_ms(1, 10);
    std::normal_distribution<double> step(0.0, std::uniform_real_distribution<double>(0.1, 2.0)(rng));
    std::bernoulli_distribution snap(0.5), jump(0.01);
    std::uniform_real_distribution<double> level(-10.0, 10.0);
    const bool quantize = snap(rng);
    std::vector<RadioSample> out;
    out.reserve(n);
    double t = 0.0, d = level(rng);
    for (std::size_t i = 0; i < n; ++i) {
        if (i) t += gap_ms(rng) / 1000.0;
        d = jump(rng) ? level(rng) : std::clamp(d + step(rng), -20.0, 20.0);
        double v = quantize ? std::round(d * 2.0) / 2.0 : d;
        RadioSample s;
        s.time_s = std::round(t * 1000.0) / 1000.0;
        s.rsrp_dbm[serving] = -80.0;
        s.rsrp_dbm[neighbor] = -80.0 + v;
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<RadioSample> constant_trace(double seconds, double diff_db, int serving = 30,
                                               int neighbor = 31) {
    std::vector<RadioSample> out;
    for (int i = 0; i * 10 <= static_cast<int>(std::lround(seconds * 1000)); ++i) {
        RadioSample s;
        s.time_s = i * 0.01;
        s.rsrp_dbm[serving] = -80.0;
        s.rsrp_dbm[neighbor] = -80.0 + diff_db;
        out.push_back(std::move(s));
    }
    return out;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace oracle
