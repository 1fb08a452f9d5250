#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "netanalyzer/ran/a3.hpp"

namespace netanalyzer::ran {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Vec2&) const = default;
};

double distance(Vec2 a, Vec2 b);

struct CellConfig {
    int cell_id = 0;
    int gnb_id = 0;
    Vec2 position;
    double tx_power_ref_dbm = -40.0;
    A3Config a3;

    bool operator==(const CellConfig&) const = default;
};

struct RadioParams {
    double path_loss_exponent = 3.0;
    double shadowing_sigma_db = 4.0;
    double decorrelation_m = 5.0;
    // Knot spacing of the shadowing field.
    double shadowing_grid_m = 2.0;

    bool operator==(const RadioParams&) const = default;
};

struct RadioSample {
    double time_s = 0.0;
    std::map<int, double> rsrp_dbm;
};

inline constexpr double kMinDistanceM = 0.1;

// Log-distance path loss plus the current shadowing value; d is clamped to
// kMinDistanceM.
double compute_rsrp(const CellConfig& cell, Vec2 position, double path_loss_exponent,
                    double shadow_db);

// Standard normal variates from mt19937_64 via Box-Muller, so the stream is
// identical on every standard library.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double next();

private:
    double uniform_open();

    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct Bounds {
    Vec2 min;
    Vec2 max;
};

// Spatially consistent log-normal shadowing: one independent zero-mean
// Gaussian field per cell with standard deviation sigma and separable
// exponential correlation exp(-|dx| / d_corr) * exp(-|dy| / d_corr).
// Knots on a square grid of spacing grid_m follow the first-order 2-D
// autoregression
//   s[i][j] = rho s[i-1][j] + rho s[i][j-1] - rho^2 s[i-1][j-1] + sigma (1 - rho^2) w,
// rho = exp(-grid_m / d_corr); values between knots are bilinear. Revisiting a
// position returns the same value.
class ShadowingField {
public:
    ShadowingField(std::vector<int> cell_ids, Bounds area, double sigma_db, double decorrelation_m,
                   double grid_m, std::uint64_t seed);

    double value(int cell_id, Vec2 position) const;

    std::size_t columns() const { return nx_; }
    std::size_t rows() const { return ny_; }
    double knot(int cell_id, std::size_t ix, std::size_t iy) const;

private:
    Vec2 origin_;
    double grid_m_;
    std::size_t nx_ = 0;
    std::size_t ny_ = 0;
    std::map<int, std::vector<double>> knots_;
};

}  // namespace netanalyzer::ran
