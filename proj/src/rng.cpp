#include "mmql/rng.hpp"

#include <cmath>

#include "mmql/errors.hpp"

namespace mmql {

namespace {
constexpr uint64_t kMultiplier = 6364136223846793005ULL;

uint64_t rxs_m_xs(uint64_t s) {
    uint64_t word = ((s >> ((s >> 59) + 5u)) ^ s) * 12605985483714917081ULL;
    return (word >> 43) ^ word;
}
}  // namespace

Pcg64::Pcg64(uint64_t seed, uint64_t stream) {
    inc_ = (stream << 1) | 1u;
    state_ = 0;
    state_ = state_ * kMultiplier + inc_;
    state_ += seed;
    state_ = state_ * kMultiplier + inc_;
}

uint64_t Pcg64::next_u64() {
    uint64_t old = state_;
    state_ = state_ * kMultiplier + inc_;
    return rxs_m_xs(old);
}

double Pcg64::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Pcg64::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

double Pcg64::next_gaussian() {
    if (has_cached_gaussian_) {
        has_cached_gaussian_ = false;
        return cached_gaussian_;
    }
    // 1 - u keeps the log argument in (0, 1].
    double u1 = 1.0 - next_double();
    double u2 = next_double();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    cached_gaussian_ = radius * std::sin(angle);
    has_cached_gaussian_ = true;
    return radius * std::cos(angle);
}

uint64_t Pcg64::next_below(uint64_t n) {
    if (n == 0) throw DomainError("next_below: n must be positive");
    // Rejection sampling removes modulo bias.
    uint64_t threshold = (0 - n) % n;
    for (;;) {
        uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Pcg64 derive_rng(uint64_t seed, std::string_view purpose, uint64_t index) {
    uint64_t stream = fnv1a64(purpose) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return Pcg64(seed, stream);
}

}  // namespace mmql
