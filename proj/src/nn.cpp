#include "mmql/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <memory>

namespace mmql {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

static CMap emap(const Mat& m) { return CMap(m.d.data(), m.rows, m.cols); }
static MMap emap(Mat& m) { return MMap(m.d.data(), m.rows, m.cols); }

Act parse_act(const std::string& tag) {
    if (tag == "silu") return Act::silu;
    if (tag == "relu") return Act::relu;
    if (tag == "tanh") return Act::tanh_fn;
    if (tag == "identity" || tag == "none") return Act::identity;
    throw ConfigError("unknown activation '" + tag + "'");
}

const char* act_name(Act a) {
    switch (a) {
        case Act::silu: return "silu";
        case Act::relu: return "relu";
        case Act::tanh_fn: return "tanh";
        case Act::identity: return "identity";
    }
    return "?";
}

void MlpSpec::validate() const {
    if (in_dim < 1 || out_dim < 1) throw DimensionError("MlpSpec: in/out dims must be >= 1");
    if (hidden_dim < 1) throw DimensionError("MlpSpec: hidden_dim must be >= 1");
    if (layers < 1) throw DimensionError("MlpSpec: layers must be >= 1");
}

int MlpSpec::fan_in(int layer) const { return layer == 0 ? in_dim : hidden_dim; }
int MlpSpec::fan_out(int layer) const { return layer == layers - 1 ? out_dim : hidden_dim; }

std::string MlpSpec::w_name(int layer) const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "W%02d", layer);
    return buf;
}
std::string MlpSpec::b_name(int layer) const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "b%02d", layer);
    return buf;
}

void mlp_init_params(const MlpSpec& spec, ParamStore& params, Pcg64& rng, bool zero_last) {
    spec.validate();
    for (int l = 0; l < spec.layers; ++l) {
        Mat& w = params.add(spec.w_name(l), spec.fan_in(l), spec.fan_out(l));
        Mat& b = params.add(spec.b_name(l), 1, spec.fan_out(l));
        if (zero_last && l == spec.layers - 1) continue;  // stays zero
        double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in(l)));
        for (double& x : w.d) x = rng.next_uniform(-bound, bound);
        for (double& x : b.d) x = rng.next_uniform(-bound, bound);
    }
}

static double act_apply(Act a, double x) {
    switch (a) {
        case Act::silu: return x / (1.0 + std::exp(-x));
        case Act::relu: return x > 0.0 ? x : 0.0;
        case Act::tanh_fn: return std::tanh(x);
        case Act::identity: return x;
    }
    return x;
}

static double act_deriv(Act a, double x) {
    switch (a) {
        case Act::silu: {
            double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 + x * (1.0 - s));
        }
        case Act::relu: return x > 0.0 ? 1.0 : 0.0;
        case Act::tanh_fn: {
            double th = std::tanh(x);
            return 1.0 - th * th;
        }
        case Act::identity: return 1.0;
    }
    return 1.0;
}

Mat mlp_forward(const MlpSpec& spec, const ParamStore& params, const Mat& input) {
    spec.validate();
    if (input.cols != spec.in_dim)
        throw DimensionError("mlp_forward: input width " + std::to_string(input.cols) +
                             " != spec in_dim " + std::to_string(spec.in_dim));
    Mat h = input;
    for (int l = 0; l < spec.layers; ++l) {
        const Mat& w = params.get(spec.w_name(l));
        const Mat& b = params.get(spec.b_name(l));
        Mat z(h.rows, w.cols);
        emap(z).noalias() = emap(h) * emap(w);
        for (int r = 0; r < z.rows; ++r)
            for (int c = 0; c < z.cols; ++c) z.at(r, c) += b.d[c];
        if (l < spec.layers - 1)
            for (double& x : z.d) x = act_apply(spec.act, x);
        h = std::move(z);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Tape

Tape::Ref Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Ref>(nodes_.size()) - 1;
}

Tape::Ref Tape::check(Ref r) const {
    if (r < 0 || r >= static_cast<Ref>(nodes_.size()))
        throw UsageError("Tape: node reference out of range");
    return r;
}

Tape::Ref Tape::constant(Mat v) {
    Node n;
    n.val = std::move(v);
    return push(std::move(n));
}

Tape::Ref Tape::param(const ParamStore& store, const std::string& name) {
    auto key = std::make_pair(&store, name);
    auto it = param_nodes_.find(key);
    if (it != param_nodes_.end()) return it->second;
    Node n;
    n.val = store.get(name);
    n.needs_grad = true;
    n.pstore = &store;
    n.pname = name;
    Ref r = push(std::move(n));
    param_nodes_.emplace(key, r);
    return r;
}

Tape::Ref Tape::frozen(const ParamStore& store, const std::string& name) {
    auto key = std::make_pair(&store, name);
    auto it = frozen_nodes_.find(key);
    if (it != frozen_nodes_.end()) return it->second;
    Ref r = constant(store.get(name));
    frozen_nodes_.emplace(key, r);
    return r;
}

Tape::Ref Tape::custom(Mat value, std::vector<Ref> inputs, BackFn back) {
    Node n;
    n.val = std::move(value);
    for (Ref r : inputs)
        if (nodes_[check(r)].needs_grad) n.needs_grad = true;
    n.inputs = std::move(inputs);
    if (n.needs_grad) n.back = std::move(back);
    return push(std::move(n));
}

Tape::Ref Tape::matmul(Ref a, Ref b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    if (A.cols != B.rows)
        throw DimensionError("Tape::matmul: " + A.shape_str() + " x " + B.shape_str());
    Mat C(A.rows, B.cols);
    emap(C).noalias() = emap(A) * emap(B);
    return custom(std::move(C), {a, b}, [](Tape& t, Ref self) {
        Ref a = t.nodes_[self].inputs[0];
        Ref b = t.nodes_[self].inputs[1];
        const Mat& g = t.grad(self);
        if (t.needs_grad(a))
            emap(t.grad_buffer(a)).noalias() += emap(g) * emap(t.value(b)).transpose();
        if (t.needs_grad(b))
            emap(t.grad_buffer(b)).noalias() += emap(t.value(a)).transpose() * emap(g);
    });
}

Tape::Ref Tape::add(Ref a, Ref b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    require_same_shape(A, B, "Tape::add");
    Mat C = A;
    for (size_t i = 0; i < C.size(); ++i) C.d[i] += B.d[i];
    return custom(std::move(C), {a, b}, [](Tape& t, Ref self) {
        const Mat& g = t.grad(self);
        for (Ref in : t.nodes_[self].inputs)
            if (t.needs_grad(in)) t.accumulate_grad(in, g);
    });
}

Tape::Ref Tape::sub(Ref a, Ref b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    require_same_shape(A, B, "Tape::sub");
    Mat C = A;
    for (size_t i = 0; i < C.size(); ++i) C.d[i] -= B.d[i];
    return custom(std::move(C), {a, b}, [](Tape& t, Ref self) {
        Ref a = t.nodes_[self].inputs[0];
        Ref b = t.nodes_[self].inputs[1];
        const Mat& g = t.grad(self);
        if (t.needs_grad(a)) t.accumulate_grad(a, g);
        if (t.needs_grad(b)) {
            Mat& gb = t.grad_buffer(b);
            for (size_t i = 0; i < gb.size(); ++i) gb.d[i] -= g.d[i];
        }
    });
}

Tape::Ref Tape::add_rowvec(Ref x, Ref bias) {
    const Mat& X = value(x);
    const Mat& B = value(bias);
    if (B.rows != 1 || B.cols != X.cols)
        throw DimensionError("Tape::add_rowvec: bias " + B.shape_str() + " vs x " +
                             X.shape_str());
    Mat C = X;
    for (int r = 0; r < C.rows; ++r)
        for (int c = 0; c < C.cols; ++c) C.at(r, c) += B.d[c];
    return custom(std::move(C), {x, bias}, [](Tape& t, Ref self) {
        Ref x = t.nodes_[self].inputs[0];
        Ref bias = t.nodes_[self].inputs[1];
        const Mat& g = t.grad(self);
        if (t.needs_grad(x)) t.accumulate_grad(x, g);
        if (t.needs_grad(bias)) {
            Mat& gb = t.grad_buffer(bias);
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < g.cols; ++c) gb.d[c] += g.at(r, c);
        }
    });
}

Tape::Ref Tape::mul_scalar(Ref x, double c) {
    Mat C = value(x);
    for (double& v : C.d) v *= c;
    return custom(std::move(C), {x}, [c](Tape& t, Ref self) {
        Ref x = t.nodes_[self].inputs[0];
        const Mat& g = t.grad(self);
        Mat& gx = t.grad_buffer(x);
        for (size_t i = 0; i < gx.size(); ++i) gx.d[i] += c * g.d[i];
    });
}

Tape::Ref Tape::rowscale(Ref x, std::vector<double> c) {
    const Mat& X = value(x);
    if (static_cast<int>(c.size()) != X.rows)
        throw DimensionError("Tape::rowscale: coefficient count != rows");
    Mat C = X;
    for (int r = 0; r < C.rows; ++r)
        for (int k = 0; k < C.cols; ++k) C.at(r, k) *= c[r];
    auto coef = std::make_shared<std::vector<double>>(std::move(c));
    return custom(std::move(C), {x}, [coef](Tape& t, Ref self) {
        Ref x = t.nodes_[self].inputs[0];
        const Mat& g = t.grad(self);
        Mat& gx = t.grad_buffer(x);
        for (int r = 0; r < g.rows; ++r)
            for (int k = 0; k < g.cols; ++k) gx.at(r, k) += (*coef)[r] * g.at(r, k);
    });
}

Tape::Ref Tape::activation(Ref x, Act a) {
    const Mat& X = value(x);
    Mat C = X;
    for (double& v : C.d) v = act_apply(a, v);
    return custom(std::move(C), {x}, [a](Tape& t, Ref self) {
        Ref x = t.nodes_[self].inputs[0];
        const Mat& g = t.grad(self);
        const Mat& X = t.value(x);
        Mat& gx = t.grad_buffer(x);
        for (size_t i = 0; i < gx.size(); ++i) gx.d[i] += act_deriv(a, X.d[i]) * g.d[i];
    });
}

Tape::Ref Tape::concat_cols(const std::vector<Ref>& parts) {
    if (parts.empty()) throw UsageError("Tape::concat_cols: no parts");
    int rows = value(parts[0]).rows;
    int cols = 0;
    for (Ref p : parts) {
        if (value(p).rows != rows) throw DimensionError("Tape::concat_cols: row mismatch");
        cols += value(p).cols;
    }
    Mat C(rows, cols);
    int off = 0;
    for (Ref p : parts) {
        const Mat& P = value(p);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < P.cols; ++c) C.at(r, off + c) = P.at(r, c);
        off += P.cols;
    }
    return custom(std::move(C), parts, [](Tape& t, Ref self) {
        const Mat& g = t.grad(self);
        int off = 0;
        for (Ref p : t.nodes_[self].inputs) {
            const Mat& P = t.value(p);
            if (t.needs_grad(p)) {
                Mat& gp = t.grad_buffer(p);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < P.cols; ++c) gp.at(r, c) += g.at(r, off + c);
            }
            off += P.cols;
        }
    });
}

Tape::Ref Tape::clip_rows(Ref x, std::vector<double> lo, std::vector<double> hi) {
    const Mat& X = value(x);
    if (static_cast<int>(lo.size()) != X.cols || static_cast<int>(hi.size()) != X.cols)
        throw DimensionError("Tape::clip_rows: bound count != cols");
    Mat C = X;
    for (int r = 0; r < C.rows; ++r)
        for (int c = 0; c < C.cols; ++c) {
            double v = C.at(r, c);
            C.at(r, c) = v < lo[c] ? lo[c] : (v > hi[c] ? hi[c] : v);
        }
    auto bounds = std::make_shared<std::pair<std::vector<double>, std::vector<double>>>(
        std::move(lo), std::move(hi));
    return custom(std::move(C), {x}, [bounds](Tape& t, Ref self) {
        Ref x = t.nodes_[self].inputs[0];
        const Mat& g = t.grad(self);
        const Mat& X = t.value(x);
        Mat& gx = t.grad_buffer(x);
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) {
                double v = X.at(r, c);
                if (v >= bounds->first[c] && v <= bounds->second[c])
                    gx.at(r, c) += g.at(r, c);
            }
    });
}

Tape::Ref Tape::square(Ref x) {
    const Mat& X = value(x);
    Mat C = X;
    for (double& v : C.d) v *= v;
    return custom(std::move(C), {x}, [](Tape& t, Ref self) {
        Ref x = t.nodes_[self].inputs[0];
        const Mat& g = t.grad(self);
        const Mat& X = t.value(x);
        Mat& gx = t.grad_buffer(x);
        for (size_t i = 0; i < gx.size(); ++i) gx.d[i] += 2.0 * X.d[i] * g.d[i];
    });
}

Tape::Ref Tape::min2(Ref a, Ref b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    require_same_shape(A, B, "Tape::min2");
    Mat C = A;
    for (size_t i = 0; i < C.size(); ++i) C.d[i] = std::min(A.d[i], B.d[i]);
    return custom(std::move(C), {a, b}, [](Tape& t, Ref self) {
        Ref a = t.nodes_[self].inputs[0];
        Ref b = t.nodes_[self].inputs[1];
        const Mat& g = t.grad(self);
        const Mat& A = t.value(a);
        const Mat& B = t.value(b);
        Mat* ga = t.needs_grad(a) ? &t.grad_buffer(a) : nullptr;
        Mat* gb = t.needs_grad(b) ? &t.grad_buffer(b) : nullptr;
        for (size_t i = 0; i < g.size(); ++i) {
            if (A.d[i] <= B.d[i]) {
                if (ga) ga->d[i] += g.d[i];
            } else if (gb) {
                gb->d[i] += g.d[i];
            }
        }
    });
}

Tape::Ref Tape::sum_all(Ref x) {
    const Mat& X = value(x);
    double s = 0.0;
    for (double v : X.d) s += v;
    return custom(Mat(1, 1, {s}), {x}, [](Tape& t, Ref self) {
        Ref x = t.nodes_[self].inputs[0];
        double g = t.grad(self).d[0];
        Mat& gx = t.grad_buffer(x);
        for (double& v : gx.d) v += g;
    });
}

Tape::Ref Tape::mean_all(Ref x) {
    const Mat& X = value(x);
    if (X.size() == 0) throw DimensionError("Tape::mean_all: empty input");
    double s = 0.0;
    for (double v : X.d) s += v;
    double inv = 1.0 / static_cast<double>(X.size());
    return custom(Mat(1, 1, {s * inv}), {x}, [inv](Tape& t, Ref self) {
        Ref x = t.nodes_[self].inputs[0];
        double g = t.grad(self).d[0] * inv;
        Mat& gx = t.grad_buffer(x);
        for (double& v : gx.d) v += g;
    });
}

void Tape::backward(Ref loss) {
    check(loss);
    if (backward_done_) throw UsageError("Tape::backward: already called on this tape");
    backward_done_ = true;
    const Mat& L = nodes_[loss].val;
    if (L.rows != 1 || L.cols != 1)
        throw UsageError("Tape::backward: loss must be 1x1, got " + L.shape_str());
    grads_.assign(nodes_.size(), Mat());
    grad_buffer(loss).d[0] = 1.0;
    for (Ref r = loss; r >= 0; --r) {
        Node& n = nodes_[r];
        if (!n.needs_grad || !n.back) continue;
        if (grads_[r].rows == 0) continue;  // no gradient reached this node
        n.back(*this, r);
    }
}

Mat& Tape::grad_buffer(Ref r) {
    check(r);
    if (grads_.empty()) throw UsageError("Tape::grad_buffer: backward not running");
    Mat& g = grads_[r];
    if (g.rows == 0) g = Mat(nodes_[r].val.rows, nodes_[r].val.cols);
    return g;
}

void Tape::accumulate_grad(Ref r, const Mat& g) {
    Mat& buf = grad_buffer(r);
    require_same_shape(buf, g, "Tape::accumulate_grad");
    for (size_t i = 0; i < buf.size(); ++i) buf.d[i] += g.d[i];
}

const Mat& Tape::grad(Ref r) const {
    check(r);
    if (!backward_done_) throw UsageError("Tape::grad: backward has not run");
    if (grads_[r].rows == 0) {
        // Materialize zeros for nodes the loss never touched.
        const_cast<Tape*>(this)->grads_[r] = Mat(nodes_[r].val.rows, nodes_[r].val.cols);
    }
    return grads_[r];
}

bool Tape::has_params_from(const ParamStore& store) const {
    for (auto& [key, ref] : param_nodes_)
        if (key.first == &store) return true;
    return false;
}

ParamStore Tape::grads_for(const ParamStore& store) const {
    if (!backward_done_) throw UsageError("Tape::grads_for: backward has not run");
    ParamStore out = store.zeros_like();
    for (auto& [key, ref] : param_nodes_) {
        if (key.first != &store) continue;
        if (grads_[ref].rows != 0) out.get(key.second) = grads_[ref];
    }
    return out;
}

Tape::Ref mlp_forward(Tape& tape, const MlpSpec& spec, const ParamStore& params,
                      Tape::Ref input, bool trainable) {
    spec.validate();
    if (tape.value(input).cols != spec.in_dim)
        throw DimensionError("mlp_forward(tape): input width mismatch");
    Tape::Ref h = input;
    for (int l = 0; l < spec.layers; ++l) {
        Tape::Ref w = trainable ? tape.param(params, spec.w_name(l))
                                : tape.frozen(params, spec.w_name(l));
        Tape::Ref b = trainable ? tape.param(params, spec.b_name(l))
                                : tape.frozen(params, spec.b_name(l));
        h = tape.add_rowvec(tape.matmul(h, w), b);
        if (l < spec.layers - 1) h = tape.activation(h, spec.act);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Optimizer

AdamState AdamState::init(const ParamStore& params, double lr) {
    AdamState st;
    st.lr = lr;
    st.m = params.zeros_like();
    st.v = params.zeros_like();
    return st;
}

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state) {
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    auto pit = params.begin();
    for (; pit != params.end(); ++pit) {
        const Mat& g = grads.get(pit->first);
        Mat& p = pit->second;
        require_same_shape(p, g, "adam_step");
        Mat& m = state.m.get(pit->first);
        Mat& v = state.v.get(pit->first);
        for (size_t i = 0; i < p.size(); ++i) {
            double gi = g.d[i];
            if (!std::isfinite(gi))
                throw DivergenceError("adam_step: non-finite gradient in '" + pit->first + "'");
            m.d[i] = state.beta1 * m.d[i] + (1.0 - state.beta1) * gi;
            v.d[i] = state.beta2 * v.d[i] + (1.0 - state.beta2) * gi * gi;
            double mhat = m.d[i] / bc1;
            double vhat = v.d[i] / bc2;
            p.d[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double clip_global_norm(ParamStore& grads, double max_norm) {
    if (max_norm <= 0.0) throw DomainError("clip_global_norm: max_norm must be > 0");
    double norm = grads.global_norm();
    if (norm <= max_norm || norm == 0.0) return 1.0;
    double scale = max_norm / norm;
    for (auto& [name, g] : grads)
        for (double& x : g.d) x *= scale;
    return scale;
}

}  // namespace mmql
