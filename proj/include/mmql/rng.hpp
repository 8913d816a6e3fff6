#pragma once

#include <cstdint>
#include <string_view>

namespace mmql {

// 64-bit permuted congruential generator (RXS-M-XS output over an LCG),
// one independent stream per (seed, purpose) pair. Implemented in-repo so
// that runs reproduce bitwise regardless of platform or standard library.
class Pcg64 {
public:
    Pcg64() : Pcg64(0, 0) {}
    Pcg64(uint64_t seed, uint64_t stream);

    uint64_t next_u64();

    // Uniform on [0,1) with 53 random bits.
    double next_double();

    // Uniform on [lo, hi).
    double next_uniform(double lo, double hi);

    // Standard normal via Box-Muller; consumes exactly two uniforms per pair.
    double next_gaussian();

    // Uniform integer in [0, n). n must be > 0.
    uint64_t next_below(uint64_t n);

private:
    uint64_t state_;
    uint64_t inc_;
    double cached_gaussian_ = 0.0;
    bool has_cached_gaussian_ = false;
};

uint64_t fnv1a64(std::string_view s);

// Per-purpose stream derivation. All randomness in a run flows from
// (seed, purpose[, index]) triples; the registry of purpose strings lives
// with their call sites:
//   "init/<net>"     parameter initialization
//   "data"           scripted-behavior dataset generation
//   "anchor-*"       normalized-score anchor rollouts
//   "batch"          minibatch index sampling
//   "noise"          interpolation noise draws
//   "time"           (s, r, t) time-triple sampling
//   "actor-action"   action sampling inside the actor loss
//   "critic-action"  target-policy actions for the Bellman target
//   "env"            online-interaction resets and action draws
//   "eval", <ep>     evaluation rollouts (one stream per episode)
Pcg64 derive_rng(uint64_t seed, std::string_view purpose, uint64_t index = 0);

}  // namespace mmql
