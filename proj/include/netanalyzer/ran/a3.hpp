#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace netanalyzer::ran {

// Time-to-trigger values accepted by the A3 engine, in milliseconds.
inline constexpr std::array<int, 13> kAllowedTttMs{0,   40,  64,  80,  100, 128, 160,
                                                   256, 320, 480, 512, 640, 1024};

inline constexpr double kMaxOffsetDb = 15.0;
inline constexpr double kMaxHysteresisDb = 15.0;

// Sample times are compared at microsecond resolution.
inline constexpr double kTimeEpsilonS = 1e-6;

struct A3Config {
    double offset_db = 0.0;
    double hysteresis_db = 0.0;
    int ttt_ms = 0;

    bool operator==(const A3Config&) const = default;

    // Throws InvalidConfig naming the first field that breaks an invariant.
    void validate() const;

    double entering_threshold_db() const { return offset_db + hysteresis_db; }
    double leaving_threshold_db() const { return offset_db - hysteresis_db; }
};

bool is_allowed_ttt(int ttt_ms);
bool is_half_db_step(double value_db);

nlohmann::json to_json(const A3Config& cfg);
A3Config a3_config_from_json(const nlohmann::json& doc);

struct A3Trigger {
    double time_s = 0.0;
    // (Mn - Mp) - (offset + hysteresis) at the trigger instant.
    double trigger_margin_db = 0.0;
};

// Incremental entering/leaving state machine for one serving/neighbor pair.
// The entering condition must hold at every sample covering
// [t - ttt, t]; after a trigger the monitor stays disarmed until the leaving
// condition is observed or reset() is called (handover swapped the roles).
class A3Monitor {
public:
    explicit A3Monitor(A3Config cfg) : cfg_(cfg) {}

    std::optional<A3Trigger> observe(double time_s, double neighbor_minus_serving_db);

    void reset();
    void set_config(A3Config cfg);
    const A3Config& config() const { return cfg_; }
    bool armed() const { return armed_; }

private:
    A3Config cfg_;
    bool armed_ = true;
    std::optional<double> entered_since_s_;
};

struct RadioSample;

// Scans a trace with a fixed serving/neighbor pair. Throws EmptyTrace.
std::vector<A3Trigger> evaluate_a3(std::span<const RadioSample> trace, int serving, int neighbor,
                                   const A3Config& cfg);

}  // namespace netanalyzer::ran
