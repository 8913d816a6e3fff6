#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mmql/errors.hpp"
#include "mmql/schedule.hpp"

using namespace mmql;

TEST_CASE("kind parsing accepts long and short tags") {
    CHECK(parse_schedule_kind("flow-matching") == ScheduleKind::flow_matching);
    CHECK(parse_schedule_kind("fm") == ScheduleKind::flow_matching);
    CHECK(parse_schedule_kind("variance-preserving") == ScheduleKind::variance_preserving);
    CHECK(parse_schedule_kind("vp") == ScheduleKind::variance_preserving);
    CHECK_THROWS_AS(parse_schedule_kind("cosine"), ConfigError);
}

TEST_CASE("flow-matching coefficients are linear") {
    NoiseSchedule fm{ScheduleKind::flow_matching};
    for (double t : {0.0, 0.1, 0.37, 0.5, 0.999, 1.0}) {
        auto [a, s] = alpha_sigma(fm, t);
        CHECK(a == 1.0 - t);
        CHECK(s == t);
    }
}

TEST_CASE("variance-preserving coefficients lie on the unit circle with exact endpoints") {
    NoiseSchedule vp{ScheduleKind::variance_preserving};
    auto [a0, s0] = alpha_sigma(vp, 0.0);
    CHECK(a0 == 1.0);
    CHECK(s0 == 0.0);
    auto [a1, s1] = alpha_sigma(vp, 1.0);
    CHECK(a1 == 0.0);
    CHECK(s1 == 1.0);
    auto [ah, sh] = alpha_sigma(vp, 0.5);
    CHECK(ah == doctest::Approx(0.7071067811865476).epsilon(1e-15));
    CHECK(sh == doctest::Approx(0.7071067811865476).epsilon(1e-15));
    for (double t = 0.0; t <= 1.0; t += 0.01) {
        auto [a, s] = alpha_sigma(vp, t);
        CHECK(a * a + s * s == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(a >= 0.0);
        CHECK(s >= 0.0);
    }
}

TEST_CASE("alpha_sigma rejects t outside [0,1]") {
    NoiseSchedule fm;
    CHECK_THROWS_AS(alpha_sigma(fm, -0.01), DomainError);
    CHECK_THROWS_AS(alpha_sigma(fm, 1.01), DomainError);
}

TEST_CASE("snr values") {
    NoiseSchedule fm{ScheduleKind::flow_matching};
    CHECK(snr(fm, 0.5) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(snr(fm, 0.25) == doctest::Approx(9.0).epsilon(1e-14));
    CHECK(std::isinf(snr(fm, 0.0)));
    CHECK(snr(fm, 1.0) == 0.0);
    NoiseSchedule vp{ScheduleKind::variance_preserving};
    CHECK(snr(vp, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sample_t clamps and centers where the log-normal puts it") {
    TimeSamplerConfig cfg;
    Pcg64 rng(5, 0);
    const int n = 100000;
    std::vector<double> ts(n);
    for (int i = 0; i < n; ++i) {
        ts[static_cast<size_t>(i)] = sample_t(cfg, rng);
        REQUIRE(ts[static_cast<size_t>(i)] >= cfg.t_min);
        REQUIRE(ts[static_cast<size_t>(i)] <= cfg.t_max);
    }
    std::nth_element(ts.begin(), ts.begin() + n / 2, ts.end());
    // median sigma_hat = exp(p_mean) = 0.4493 -> median t = 0.4493/1.4493 = 0.3100
    CHECK(ts[n / 2] == doctest::Approx(0.3100).epsilon(0.02));
}

TEST_CASE("sample_s_given_t is uniform on [0, t]") {
    Pcg64 rng(6, 0);
    const double t = 0.62;
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double s = sample_s_given_t(t, rng);
        REQUIRE(s >= 0.0);
        REQUIRE(s <= t);
        sum += s;
    }
    CHECK(sum / n == doctest::Approx(t / 2).epsilon(0.01));
}

TEST_CASE("map_r hits the max(s, t - delta) cases") {
    CHECK(map_r(0.10, 0.90, 0.05) == doctest::Approx(0.85).epsilon(1e-15));
    CHECK(map_r(0.88, 0.90, 0.05) == 0.88);
    CHECK(map_r(0.90, 0.90, 0.05) == 0.90);  // s == t collapses r to t
}

TEST_CASE("triples satisfy 0 <= s <= r <= t") {
    TimeSamplerConfig cfg;
    Pcg64 rng(7, 0);
    for (int i = 0; i < 10000; ++i) {
        TimeTriple tri = sample_triple(cfg, rng);
        REQUIRE(tri.s >= 0.0);
        REQUIRE(tri.s <= tri.r);
        REQUIRE(tri.r <= tri.t);
        REQUIRE(tri.t <= cfg.t_max);
        // r is never more than delta_t below t
        REQUIRE(tri.t - tri.r <= cfg.delta_t + 1e-15);
    }
}

TEST_CASE("inference grid descends from 1 to 0") {
    std::vector<double> g = inference_grid(4);
    REQUIRE(g.size() == 5);
    CHECK(g[0] == 1.0);
    CHECK(g[1] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(g[2] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g[3] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g[4] == 0.0);
    std::vector<double> g1 = inference_grid(1);
    REQUIRE(g1.size() == 2);
    CHECK(g1[0] == 1.0);
    CHECK(g1[1] == 0.0);
    CHECK_THROWS_AS(inference_grid(0), DomainError);
}

TEST_CASE("sampler config validation") {
    TimeSamplerConfig bad;
    bad.delta_t = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    TimeSamplerConfig bad2;
    bad2.t_min = 0.9;
    bad2.t_max = 0.1;
    CHECK_THROWS_AS(bad2.validate(), ConfigError);
    TimeSamplerConfig bad3;
    bad3.p_std = 0.0;
    CHECK_THROWS_AS(bad3.validate(), ConfigError);
}
