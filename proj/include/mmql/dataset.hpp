#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmql/mat.hpp"
#include "mmql/rng.hpp"

namespace mmql {

struct Transition {
    std::vector<double> s;
    std::vector<double> a;
    double r = 0.0;
    std::vector<double> s2;
    bool done = false;
};

// Affine normalization x_norm = (x_raw - mean) * scale, with scale chosen as
// 0.5/std so stored data has std 0.5 (degenerate dimensions get scale 1).
struct NormStats {
    std::vector<double> state_mean, state_scale;
    std::vector<double> action_mean, action_scale;

    std::vector<double> normalize_state(const std::vector<double>& raw) const;
    std::vector<double> denormalize_state(const std::vector<double>& norm) const;
    std::vector<double> normalize_action(const std::vector<double>& raw) const;
    std::vector<double> denormalize_action(const std::vector<double>& norm) const;
};

// Computes mean and 0.5/std per dimension over the rows.
NormStats compute_norm_stats(const std::vector<Transition>& raw, int state_dim,
                             int action_dim);

struct Dataset {
    std::string env;
    int state_dim = 0;
    int action_dim = 0;
    NormStats norm;
    std::vector<Transition> transitions;  // stored normalized

    void validate() const;
};

// Newline-delimited records: line 1 is a header object, then one object per
// transition with fields in the order s, a, r, s2, done. See FORMAT.md.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity);

    void push(Transition t);
    size_t size() const { return ring_.size(); }
    size_t capacity() const { return capacity_; }
    const Transition& at(size_t i) const { return ring_[i]; }

    // Uniform with replacement.
    std::vector<size_t> sample_indices(size_t batch, Pcg64& rng) const;

private:
    size_t capacity_;
    size_t head_ = 0;  // next slot to overwrite once full
    std::vector<Transition> ring_;
};

// Column view of a batch of transitions.
struct TransitionBatch {
    Mat states;
    Mat actions;
    Mat rewards;      // n x 1
    Mat next_states;
    std::vector<double> dones;
};

}  // namespace mmql
