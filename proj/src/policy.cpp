#include "mmql/policy.hpp"

#include <cmath>

#include "mmql/errors.hpp"

namespace mmql {

void timefeat(double t, double* out16) {
    for (int j = 0; j < kTimeFeatDim / 2; ++j) {
        double w = M_PI * std::pow(2.0, j);
        out16[2 * j] = std::sin(w * t);
        out16[2 * j + 1] = std::cos(w * t);
    }
}

Mat timefeat_rows(const std::vector<double>& ts) {
    Mat out(static_cast<int>(ts.size()), kTimeFeatDim);
    for (size_t i = 0; i < ts.size(); ++i)
        timefeat(ts[i], out.d.data() + i * kTimeFeatDim);
    return out;
}

void ActionSpaceSpec::validate() const {
    if (dim < 1) throw DimensionError("ActionSpaceSpec: dim must be >= 1");
    if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim)
        throw DimensionError("ActionSpaceSpec: bound lengths != dim");
    for (int i = 0; i < dim; ++i) {
        if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i]))
            throw DomainError("ActionSpaceSpec: bounds must be finite with lo < hi");
    }
    if (!(sigma_d > 0.0)) throw DomainError("ActionSpaceSpec: sigma_d must be > 0");
}

PolicyNet make_policy_net(int state_dim, int action_dim, int hidden_dim, int layers,
                          Pcg64& rng) {
    PolicyNet net;
    net.state_dim = state_dim;
    net.action_dim = action_dim;
    net.spec.in_dim = action_dim + state_dim + 2 * kTimeFeatDim;
    net.spec.hidden_dim = hidden_dim;
    net.spec.layers = layers;
    net.spec.out_dim = action_dim;
    net.spec.act = Act::silu;
    mlp_init_params(net.spec, net.params, rng, /*zero_last=*/true);
    net.target = net.params;
    return net;
}

static void check_policy_shapes(const PolicyNet& net, const Mat& states, const Mat& x_t,
                                const std::vector<double>& s, const std::vector<double>& t) {
    if (states.cols != net.state_dim) throw DimensionError("policy: state width mismatch");
    if (x_t.cols != net.action_dim) throw DimensionError("policy: x_t width mismatch");
    if (states.rows != x_t.rows) throw DimensionError("policy: row count mismatch");
    if (static_cast<int>(s.size()) != states.rows || static_cast<int>(t.size()) != states.rows)
        throw DimensionError("policy: time vector length mismatch");
}

Mat policy_input(const PolicyNet& net, const Mat& states, const Mat& x_t,
                 const std::vector<double>& s, const std::vector<double>& t) {
    check_policy_shapes(net, states, x_t, s, t);
    int n = states.rows;
    Mat in(n, net.spec.in_dim);
    for (int r = 0; r < n; ++r) {
        double* row = in.d.data() + static_cast<size_t>(r) * in.cols;
        int off = 0;
        for (int c = 0; c < x_t.cols; ++c) row[off++] = x_t.at(r, c);
        for (int c = 0; c < states.cols; ++c) row[off++] = states.at(r, c);
        timefeat(s[static_cast<size_t>(r)], row + off);
        off += kTimeFeatDim;
        timefeat(t[static_cast<size_t>(r)], row + off);
    }
    return in;
}

Mat denoise(const PolicyNet& net, const ParamStore& params, const Mat& states,
            const Mat& x_t, const std::vector<double>& s, const std::vector<double>& t) {
    return mlp_forward(net.spec, params, policy_input(net, states, x_t, s, t));
}

static std::pair<std::vector<double>, std::vector<double>> rowwise_ddim_coeffs(
    const std::vector<double>& s, const std::vector<double>& t, const NoiseSchedule& sched) {
    std::vector<double> cx(s.size()), cxt(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        auto [a, b] = ddim_coeffs(s[i], t[i], sched);
        cx[i] = a;
        cxt[i] = b;
    }
    return {std::move(cx), std::move(cxt)};
}

Mat jump(const PolicyNet& net, const ParamStore& params, const Mat& states,
         const Mat& x_t, const std::vector<double>& s, const std::vector<double>& t,
         const NoiseSchedule& sched) {
    Mat xhat = denoise(net, params, states, x_t, s, t);
    auto [cx, cxt] = rowwise_ddim_coeffs(s, t, sched);
    Mat out(xhat.rows, xhat.cols);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c)
            out.at(r, c) = cx[static_cast<size_t>(r)] * xhat.at(r, c) +
                           cxt[static_cast<size_t>(r)] * x_t.at(r, c);
    return out;
}

Tape::Ref denoise_node(Tape& tape, const PolicyNet& net, const ParamStore& params,
                       bool trainable, const Mat& states, Tape::Ref x_t,
                       const std::vector<double>& s, const std::vector<double>& t) {
    check_policy_shapes(net, states, tape.value(x_t), s, t);
    Tape::Ref state_c = tape.constant(states);
    Tape::Ref tf_s = tape.constant(timefeat_rows(s));
    Tape::Ref tf_t = tape.constant(timefeat_rows(t));
    Tape::Ref in = tape.concat_cols({x_t, state_c, tf_s, tf_t});
    return mlp_forward(tape, net.spec, params, in, trainable);
}

Tape::Ref jump_node(Tape& tape, const PolicyNet& net, const ParamStore& params,
                    bool trainable, const Mat& states, Tape::Ref x_t,
                    const std::vector<double>& s, const std::vector<double>& t,
                    const NoiseSchedule& sched) {
    Tape::Ref xhat = denoise_node(tape, net, params, trainable, states, x_t, s, t);
    auto [cx, cxt] = rowwise_ddim_coeffs(s, t, sched);
    return tape.add(tape.rowscale(xhat, std::move(cx)), tape.rowscale(x_t, std::move(cxt)));
}

Mat sample_actions(const PolicyNet& net, const ParamStore& params, const Mat& states,
                   int n_steps, const ActionSpaceSpec& space, const NoiseSchedule& sched,
                   Pcg64& rng) {
    space.validate();
    if (space.dim != net.action_dim)
        throw DimensionError("sample_actions: action space dim mismatch");
    int n = states.rows;
    Mat x(n, net.action_dim);
    for (double& v : x.d) v = space.sigma_d * rng.next_gaussian();
    std::vector<double> grid = inference_grid(n_steps);
    std::vector<double> s_vec(static_cast<size_t>(n)), t_vec(static_cast<size_t>(n));
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
        std::fill(t_vec.begin(), t_vec.end(), grid[i]);
        std::fill(s_vec.begin(), s_vec.end(), grid[i + 1]);
        x = jump(net, params, states, x, s_vec, t_vec, sched);
    }
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < x.cols; ++c) {
            double v = x.at(r, c);
            x.at(r, c) = v < space.lo[c] ? space.lo[c] : (v > space.hi[c] ? space.hi[c] : v);
        }
    return x;
}

std::vector<double> sample_action(const PolicyNet& net, const ParamStore& params,
                                  const std::vector<double>& state, int n_steps,
                                  const ActionSpaceSpec& space, const NoiseSchedule& sched,
                                  Pcg64& rng) {
    Mat states(1, static_cast<int>(state.size()), state);
    Mat a = sample_actions(net, params, states, n_steps, space, sched, rng);
    return a.d;
}

Tape::Ref sample_actions_node(Tape& tape, const PolicyNet& net, const ParamStore& params,
                              const Mat& states, Mat initial_noise, int n_steps,
                              const ActionSpaceSpec& space, const NoiseSchedule& sched) {
    space.validate();
    if (initial_noise.rows != states.rows || initial_noise.cols != net.action_dim)
        throw DimensionError("sample_actions_node: noise shape mismatch");
    int n = states.rows;
    Tape::Ref x = tape.constant(std::move(initial_noise));
    std::vector<double> grid = inference_grid(n_steps);
    std::vector<double> s_vec(static_cast<size_t>(n)), t_vec(static_cast<size_t>(n));
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
        std::fill(t_vec.begin(), t_vec.end(), grid[i]);
        std::fill(s_vec.begin(), s_vec.end(), grid[i + 1]);
        x = jump_node(tape, net, params, /*trainable=*/true, states, x, s_vec, t_vec, sched);
    }
    return tape.clip_rows(x, space.lo, space.hi);
}

void ema_update(ParamStore& target, const ParamStore& online, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("ema_update: alpha must be in [0,1]");
    target.ema_from(online, alpha);
}

}  // namespace mmql
