#pragma once

#include <vector>

#include "mmql/interpolant.hpp"
#include "mmql/mat.hpp"
#include "mmql/nn.hpp"
#include "mmql/rng.hpp"
#include "mmql/schedule.hpp"

namespace mmql {

// Sinusoidal embedding of a scalar time: K/2 (sin, cos) pairs at geometrically
// spaced frequencies pi * 2^j.
inline constexpr int kTimeFeatDim = 16;
void timefeat(double t, double* out16);
Mat timefeat_rows(const std::vector<double>& ts);

struct ActionSpaceSpec {
    int dim = 0;
    std::vector<double> lo;
    std::vector<double> hi;
    double sigma_d = 0.5;  // std of the initial noise draw

    void validate() const;
};

// The generative policy G_theta. Network input per row is
// [x_t | state | timefeat(s) | timefeat(t)], output is the denoised action.
// `params` is the online net; `target` is its EMA copy (teacher and the actor
// target used by the critic are one snapshot).
struct PolicyNet {
    int state_dim = 0;
    int action_dim = 0;
    MlpSpec spec;
    ParamStore params;
    ParamStore target;
};

PolicyNet make_policy_net(int state_dim, int action_dim, int hidden_dim, int layers,
                          Pcg64& rng);

// Assembles the network input rows. states: n x state_dim, x_t: n x action_dim,
// s/t: per-row times.
Mat policy_input(const PolicyNet& net, const Mat& states, const Mat& x_t,
                 const std::vector<double>& s, const std::vector<double>& t);

// Denoised estimate x_hat = G(x_t, s, t | state); gradient-free.
Mat denoise(const PolicyNet& net, const ParamStore& params, const Mat& states,
            const Mat& x_t, const std::vector<double>& s, const std::vector<double>& t);

// One deterministic jump x_s = DDIM(x_t, x_hat, s, t), rowwise.
Mat jump(const PolicyNet& net, const ParamStore& params, const Mat& states,
         const Mat& x_t, const std::vector<double>& s, const std::vector<double>& t,
         const NoiseSchedule& sched);

// Tape-recorded variants. `x_t` may itself be a graph node (multi-step
// sampling) or a constant; with trainable=false the parameters contribute no
// gradient.
Tape::Ref denoise_node(Tape& tape, const PolicyNet& net, const ParamStore& params,
                       bool trainable, const Mat& states, Tape::Ref x_t,
                       const std::vector<double>& s, const std::vector<double>& t);
Tape::Ref jump_node(Tape& tape, const PolicyNet& net, const ParamStore& params,
                    bool trainable, const Mat& states, Tape::Ref x_t,
                    const std::vector<double>& s, const std::vector<double>& t,
                    const NoiseSchedule& sched);

// Action inference: draw a_N ~ Normal(0, sigma_d^2 I), apply N jumps down the
// uniform grid, clip the result to the action bounds. Batched over rows.
Mat sample_actions(const PolicyNet& net, const ParamStore& params, const Mat& states,
                   int n_steps, const ActionSpaceSpec& space, const NoiseSchedule& sched,
                   Pcg64& rng);
std::vector<double> sample_action(const PolicyNet& net, const ParamStore& params,
                                  const std::vector<double>& state, int n_steps,
                                  const ActionSpaceSpec& space, const NoiseSchedule& sched,
                                  Pcg64& rng);

// Tape-recorded sampler for the actor's Q term; the initial noise is supplied
// so the caller controls the stream. Gradients flow into `params` through
// every jump.
Tape::Ref sample_actions_node(Tape& tape, const PolicyNet& net, const ParamStore& params,
                              const Mat& states, Mat initial_noise, int n_steps,
                              const ActionSpaceSpec& space, const NoiseSchedule& sched);

// target <- alpha * target + (1 - alpha) * online.
void ema_update(ParamStore& target, const ParamStore& online, double alpha);

}  // namespace mmql
