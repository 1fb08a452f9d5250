#include "netanalyzer/ran/radio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace netanalyzer::ran {

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double compute_rsrp(const CellConfig& cell, Vec2 position, double path_loss_exponent,
                    double shadow_db) {
    double d = std::max(distance(cell.position, position), kMinDistanceM);
    return cell.tx_power_ref_dbm - 10.0 * path_loss_exponent * std::log10(d) + shadow_db;
}

double GaussianSource::uniform_open() {
    // 53 random bits mapped to (0, 1).
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianSource::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform_open();
    double u2 = uniform_open();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

ShadowingField::ShadowingField(std::vector<int> cell_ids, Bounds area, double sigma_db,
                               double decorrelation_m, double grid_m, std::uint64_t seed)
    : origin_{area.min.x - grid_m, area.min.y - grid_m}, grid_m_(grid_m) {
    nx_ = static_cast<std::size_t>(std::ceil((area.max.x - area.min.x) / grid_m)) + 3;
    ny_ = static_cast<std::size_t>(std::ceil((area.max.y - area.min.y) / grid_m)) + 3;

    const double rho = std::exp(-grid_m / decorrelation_m);
    const double edge = sigma_db * std::sqrt(1.0 - rho * rho);
    const double interior = sigma_db * (1.0 - rho * rho);

    GaussianSource gauss(seed);
    for (int id : cell_ids) {
        std::vector<double> s(nx_ * ny_);
        auto at = [&](std::size_t ix, std::size_t iy) -> double& { return s[iy * nx_ + ix]; };
        for (std::size_t iy = 0; iy < ny_; ++iy) {
            for (std::size_t ix = 0; ix < nx_; ++ix) {
                double w = gauss.next();
                if (ix == 0 && iy == 0)
                    at(ix, iy) = sigma_db * w;
                else if (iy == 0)
                    at(ix, iy) = rho * at(ix - 1, 0) + edge * w;
                else if (ix == 0)
                    at(ix, iy) = rho * at(0, iy - 1) + edge * w;
                else
                    at(ix, iy) = rho * at(ix - 1, iy) + rho * at(ix, iy - 1) -
                                 rho * rho * at(ix - 1, iy - 1) + interior * w;
            }
        }
        knots_.emplace(id, std::move(s));
    }
}

double ShadowingField::knot(int cell_id, std::size_t ix, std::size_t iy) const {
    return knots_.at(cell_id).at(iy * nx_ + ix);
}

double ShadowingField::value(int cell_id, Vec2 p) const {
    const auto& s = knots_.at(cell_id);
    double gx = std::clamp((p.x - origin_.x) / grid_m_, 0.0, static_cast<double>(nx_ - 1));
    double gy = std::clamp((p.y - origin_.y) / grid_m_, 0.0, static_cast<double>(ny_ - 1));
    auto ix = std::min(static_cast<std::size_t>(gx), nx_ - 2);
    auto iy = std::min(static_cast<std::size_t>(gy), ny_ - 2);
    double fx = gx - static_cast<double>(ix);
    double fy = gy - static_cast<double>(iy);
    double s00 = s[iy * nx_ + ix], s10 = s[iy * nx_ + ix + 1];
    double s01 = s[(iy + 1) * nx_ + ix], s11 = s[(iy + 1) * nx_ + ix + 1];
    return (1 - fy) * ((1 - fx) * s00 + fx * s10) + fy * ((1 - fx) * s01 + fx * s11);
}

}  // namespace netanalyzer::ran
