#include "mmql/critic.hpp"

#include <cmath>

#include "mmql/errors.hpp"

namespace mmql {

CriticPair make_critic_pair(int state_dim, int action_dim, int hidden_dim, int layers,
                            Pcg64& rng) {
    CriticPair pair;
    pair.state_dim = state_dim;
    pair.action_dim = action_dim;
    pair.spec.in_dim = state_dim + action_dim;
    pair.spec.hidden_dim = hidden_dim;
    pair.spec.layers = layers;
    pair.spec.out_dim = 1;
    pair.spec.act = Act::silu;
    mlp_init_params(pair.spec, pair.q1, rng);
    mlp_init_params(pair.spec, pair.q2, rng);
    pair.q1_target = pair.q1;
    pair.q2_target = pair.q2;
    return pair;
}

Mat critic_input(const Mat& states, const Mat& actions) {
    if (states.rows != actions.rows)
        throw DimensionError("critic_input: row count mismatch");
    Mat in(states.rows, states.cols + actions.cols);
    for (int r = 0; r < in.rows; ++r) {
        for (int c = 0; c < states.cols; ++c) in.at(r, c) = states.at(r, c);
        for (int c = 0; c < actions.cols; ++c) in.at(r, states.cols + c) = actions.at(r, c);
    }
    return in;
}

Mat q_forward(const CriticPair& pair, const ParamStore& params, const Mat& states,
              const Mat& actions) {
    if (states.cols != pair.state_dim || actions.cols != pair.action_dim)
        throw DimensionError("q_forward: state/action width mismatch");
    return mlp_forward(pair.spec, params, critic_input(states, actions));
}

std::pair<double, double> q_values(const CriticPair& pair, const std::vector<double>& state,
                                   const std::vector<double>& action) {
    Mat s(1, static_cast<int>(state.size()), state);
    Mat a(1, static_cast<int>(action.size()), action);
    return {q_forward(pair, pair.q1, s, a).d[0], q_forward(pair, pair.q2, s, a).d[0]};
}

CriticLossResult critic_loss(const CriticPair& pair, const TransitionBatch& batch,
                             const PolicyNet& policy, const ActionSpaceSpec& space,
                             const NoiseSchedule& sched, double gamma, int n_steps,
                             Pcg64& rng) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("critic_loss: gamma must be in [0,1)");
    int n = batch.states.rows;
    if (n == 0) throw DimensionError("critic_loss: empty batch");

    // Bellman targets, entirely gradient-free.
    Mat a_next = sample_actions(policy, policy.target, batch.next_states, n_steps, space,
                                sched, rng);
    Mat q1t = q_forward(pair, pair.q1_target, batch.next_states, a_next);
    Mat q2t = q_forward(pair, pair.q2_target, batch.next_states, a_next);
    Mat y(n, 1);
    for (int i = 0; i < n; ++i) {
        double boot = std::min(q1t.d[static_cast<size_t>(i)], q2t.d[static_cast<size_t>(i)]);
        double yi = batch.rewards.d[static_cast<size_t>(i)] +
                    (1.0 - batch.dones[static_cast<size_t>(i)]) * gamma * boot;
        if (!std::isfinite(yi)) throw DivergenceError("critic_loss: non-finite Bellman target");
        y.d[static_cast<size_t>(i)] = yi;
    }

    Tape tape;
    Tape::Ref in = tape.constant(critic_input(batch.states, batch.actions));
    Tape::Ref q1 = mlp_forward(tape, pair.spec, pair.q1, in, /*trainable=*/true);
    Tape::Ref q2 = mlp_forward(tape, pair.spec, pair.q2, in, /*trainable=*/true);
    Tape::Ref yc = tape.constant(y);
    Tape::Ref loss = tape.mul_scalar(
        tape.add(tape.mean_all(tape.square(tape.sub(q1, yc))),
                 tape.mean_all(tape.square(tape.sub(q2, yc)))),
        0.5);

    CriticLossResult res;
    res.loss = tape.value(loss).d[0];
    if (!std::isfinite(res.loss)) throw DivergenceError("critic_loss: non-finite loss");
    double abs_sum = 0.0;
    for (int i = 0; i < n; ++i)
        abs_sum += std::fabs(tape.value(q1).d[static_cast<size_t>(i)]) +
                   std::fabs(tape.value(q2).d[static_cast<size_t>(i)]);
    res.q_abs_mean = abs_sum / (2.0 * n);

    tape.backward(loss);
    res.grad_q1 = tape.grads_for(pair.q1);
    res.grad_q2 = tape.grads_for(pair.q2);
    return res;
}

}  // namespace mmql
