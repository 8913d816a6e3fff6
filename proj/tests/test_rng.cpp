#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mmql/rng.hpp"

using namespace mmql;

TEST_CASE("same seed and stream reproduce the sequence") {
    Pcg64 a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different streams differ") {
    Pcg64 a(42, 0), b(42, 1);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
}

TEST_CASE("next_double is in [0,1) and roughly uniform") {
    Pcg64 rng(1, 0);
    const int n = 100000;
    double sum = 0.0, mn = 1.0, mx = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.next_double();
        sum += x;
        mn = std::min(mn, x);
        mx = std::max(mx, x);
    }
    CHECK(mn >= 0.0);
    CHECK(mx < 1.0);
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("next_uniform covers the requested interval") {
    Pcg64 rng(2, 0);
    for (int i = 0; i < 1000; ++i) {
        double x = rng.next_uniform(-3.0, 2.0);
        CHECK(x >= -3.0);
        CHECK(x < 2.0);
    }
}

TEST_CASE("next_gaussian has standard moments") {
    Pcg64 rng(3, 0);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    int within_1 = 0;
    for (int i = 0; i < n; ++i) {
        double x = rng.next_gaussian();
        sum += x;
        sumsq += x * x;
        within_1 += std::fabs(x) <= 1.0;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
    // P(|Z| <= 1) = 0.6827
    CHECK(static_cast<double>(within_1) / n == doctest::Approx(0.6827).epsilon(0.01));
}

TEST_CASE("next_below is bounded and roughly uniform") {
    Pcg64 rng(4, 0);
    const int n = 100000;
    std::vector<int> counts(10, 0);
    for (int i = 0; i < n; ++i) {
        uint64_t k = rng.next_below(10);
        REQUIRE(k < 10);
        ++counts[static_cast<size_t>(k)];
    }
    for (int c : counts) CHECK(std::fabs(c / static_cast<double>(n) - 0.1) < 0.01);
}

TEST_CASE("fnv1a64 matches the published reference vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("derive_rng gives independent reproducible streams") {
    Pcg64 a1 = derive_rng(9, "time");
    Pcg64 a2 = derive_rng(9, "time");
    Pcg64 b = derive_rng(9, "noise");
    Pcg64 c = derive_rng(9, "time", 1);
    int same_b = 0, same_c = 0;
    for (int i = 0; i < 64; ++i) {
        uint64_t x = a1.next_u64();
        CHECK(x == a2.next_u64());
        same_b += x == b.next_u64();
        same_c += x == c.next_u64();
    }
    CHECK(same_b == 0);
    CHECK(same_c == 0);
}
