#pragma once

#include <utility>

#include "mmql/dataset.hpp"
#include "mmql/nn.hpp"
#include "mmql/policy.hpp"

namespace mmql {

// Two independent Q networks (input [state | action] -> scalar) with EMA
// target copies. Targets never receive gradients.
struct CriticPair {
    int state_dim = 0;
    int action_dim = 0;
    MlpSpec spec;
    ParamStore q1, q2;
    ParamStore q1_target, q2_target;
};

CriticPair make_critic_pair(int state_dim, int action_dim, int hidden_dim, int layers,
                            Pcg64& rng);

Mat critic_input(const Mat& states, const Mat& actions);

// Batched Q(s, a) under the given parameter set (n x 1).
Mat q_forward(const CriticPair& pair, const ParamStore& params, const Mat& states,
              const Mat& actions);

// Online-head values for a single (state, action).
std::pair<double, double> q_values(const CriticPair& pair, const std::vector<double>& state,
                                   const std::vector<double>& action);

struct CriticLossResult {
    double loss = 0.0;
    double q_abs_mean = 0.0;  // mean |Q| over both online heads
    ParamStore grad_q1, grad_q2;
};

// Clipped double-Q regression: y = r + (1 - done) * gamma * min_i
// Q_target_i(s', a') with a' drawn from the target policy's N-step sampler.
// The target is gradient-constant; the loss averages over the batch and both
// online heads.
CriticLossResult critic_loss(const CriticPair& pair, const TransitionBatch& batch,
                             const PolicyNet& policy, const ActionSpaceSpec& space,
                             const NoiseSchedule& sched, double gamma, int n_steps,
                             Pcg64& rng);

}  // namespace mmql
