#include <doctest.h>

#include <cmath>

#include "netanalyzer/ran/radio.hpp"
#include "netanalyzer/ran/simulator.hpp"
#include "netanalyzer/rapp.hpp"

using namespace netanalyzer;
using ran::Vec2;

TEST_CASE("log-distance path loss") {
    ran::CellConfig cell{30, 30, {0.0, 0.0}, -40.0, {}};
    CHECK(ran::compute_rsrp(cell, {1.0, 0.0}, 3.0, 0.0) == doctest::Approx(-40.0));
    CHECK(ran::compute_rsrp(cell, {10.0, 0.0}, 3.0, 0.0) == doctest::Approx(-70.0));
    CHECK(ran::compute_rsrp(cell, {0.0, 10.0}, 3.0, 2.5) == doctest::Approx(-67.5));
    // Distance is clamped so the cell site itself stays finite.
    CHECK(ran::compute_rsrp(cell, {0.0, 0.0}, 3.0, 0.0) == doctest::Approx(-10.0));
}

TEST_CASE("gaussian source is reproducible") {
    ran::GaussianSource a(5), b(5), c(6);
    double diff = 0.0;
    for (int i = 0; i < 100; ++i) {
        double x = a.next();
        CHECK(x == b.next());
        diff += std::abs(x - c.next());
    }
    CHECK(diff > 0.0);
}

TEST_CASE("shadowing field is a deterministic function of position") {
    ran::Bounds area{{0.0, 0.0}, {20.0, 2.0}};
    ran::ShadowingField f({30, 31}, area, 4.0, 5.0, 2.0, 42);
    ran::ShadowingField g({30, 31}, area, 4.0, 5.0, 2.0, 42);
    ran::ShadowingField h({30, 31}, area, 4.0, 5.0, 2.0, 43);
    for (double x = 0.0; x <= 20.0; x += 0.37) {
        Vec2 p{x, 0.5};
        CHECK(f.value(30, p) == g.value(30, p));
        CHECK(f.value(30, p) == f.value(30, p));
    }
    CHECK(f.value(30, {7.3, 0.5}) != h.value(30, {7.3, 0.5}));
    CHECK(f.value(30, {7.3, 0.5}) != f.value(31, {7.3, 0.5}));
}

TEST_CASE("shadowing field interpolates between knots") {
    ran::ShadowingField f({30}, {{0.0, 0.0}, {10.0, 10.0}}, 4.0, 5.0, 2.0, 9);
    // Find the knot positions from the field itself: knots sit on a 2 m grid,
    // so the midpoint of two neighbouring knot values is the value halfway.
    REQUIRE(f.columns() >= 3);
    REQUIRE(f.rows() >= 3);
    Vec2 a{0.0, 0.0}, b{2.0, 0.0}, mid{1.0, 0.0};
    CHECK(f.value(30, mid) == doctest::Approx((f.value(30, a) + f.value(30, b)) / 2.0));
}

TEST_CASE("knot statistics match sigma and the decorrelation distance") {
    // Pooled over seeds: variance at a knot ~ sigma^2 = 16 dB^2, and the
    // correlation 5 knots (5 m at 1 m spacing) apart ~ exp(-1).
    const int seeds = 3000;
    double s0 = 0, s1 = 0, s00 = 0, s11 = 0, s01 = 0, sy = 0, syy = 0, s0y = 0;
    for (int seed = 0; seed < seeds; ++seed) {
        ran::ShadowingField f({1}, {{0.0, 0.0}, {12.0, 12.0}}, 4.0, 5.0, 1.0, seed);
        double a = f.knot(1, 3, 3), b = f.knot(1, 8, 3), c = f.knot(1, 3, 8);
        s0 += a;
        s1 += b;
        s00 += a * a;
        s11 += b * b;
        s01 += a * b;
        sy += c;
        syy += c * c;
        s0y += a * c;
    }
    const double n = seeds;
    double var0 = s00 / n - (s0 / n) * (s0 / n);
    double var1 = s11 / n - (s1 / n) * (s1 / n);
    double cov = s01 / n - (s0 / n) * (s1 / n);
    double vary = syy / n - (sy / n) * (sy / n);
    double covy = s0y / n - (s0 / n) * (sy / n);
    CHECK(std::abs(s0 / n) < 0.3);
    CHECK(var0 == doctest::Approx(16.0).epsilon(0.1));
    CHECK(var1 == doctest::Approx(16.0).epsilon(0.1));
    CHECK(cov / std::sqrt(var0 * var1) == doctest::Approx(std::exp(-1.0)).epsilon(0.15));
    CHECK(covy / std::sqrt(var0 * vary) == doctest::Approx(std::exp(-1.0)).epsilon(0.15));
}

TEST_CASE("reference scenario RSRP at t = 25 s is frozen") {
    auto spec = rapp::reference_scenario();
    auto out = ran::run_scenario(spec.with_a3(spec.misconfigured));
    const ran::RadioSample* at25 = nullptr;
    for (const auto& s : out.radio)
        if (std::abs(s.time_s - 25.0) < 1e-9) at25 = &s;
    REQUIRE(at25 != nullptr);
    CHECK(at25->rsrp_dbm.at(30) == doctest::Approx(-65.4872930973128).epsilon(1e-12));
    CHECK(at25->rsrp_dbm.at(31) == doctest::Approx(-72.7517731547235).epsilon(1e-12));
    // The radio trace does not depend on the A3 settings.
    auto corrected = ran::run_scenario(spec.with_a3(spec.corrected));
    REQUIRE(corrected.radio.size() == out.radio.size());
    for (std::size_t i = 0; i < out.radio.size(); i += 97)
        CHECK(corrected.radio[i].rsrp_dbm == out.radio[i].rsrp_dbm);
}
