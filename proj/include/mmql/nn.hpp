#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mmql/errors.hpp"
#include "mmql/mat.hpp"
#include "mmql/param_store.hpp"
#include "mmql/rng.hpp"

namespace mmql {

enum class Act { identity, relu, tanh_fn, silu };

Act parse_act(const std::string& tag);
const char* act_name(Act a);

// An MLP with `layers` linear layers. layers=1 is a single in->out linear map;
// layers=L>1 is in->hidden->(...)->out with the activation applied after every
// linear layer except the last.
struct MlpSpec {
    int in_dim = 0;
    int hidden_dim = 1;
    int layers = 1;
    int out_dim = 0;
    Act act = Act::silu;

    void validate() const;
    int fan_in(int layer) const;
    int fan_out(int layer) const;
    std::string w_name(int layer) const;
    std::string b_name(int layer) const;
};

// Fan-in uniform init (+-1/sqrt(fan_in)) for weights and biases. zero_last
// zero-initializes the final linear layer so the net starts as the zero map.
void mlp_init_params(const MlpSpec& spec, ParamStore& params, Pcg64& rng,
                     bool zero_last = false);

// Gradient-free forward pass.
Mat mlp_forward(const MlpSpec& spec, const ParamStore& params, const Mat& input);

// Reverse-mode tape. Nodes are created by the op methods below and refer to
// earlier nodes by index; backward() runs once, in reverse creation order.
class Tape {
public:
    using Ref = int;
    using BackFn = std::function<void(Tape&, Ref self)>;

    Ref constant(Mat v);
    // Trainable leaf tied to (store, name); duplicate requests return the same
    // node so gradients from every use accumulate in one place.
    Ref param(const ParamStore& store, const std::string& name);
    // Same tensor entered as a constant (target/teacher networks).
    Ref frozen(const ParamStore& store, const std::string& name);

    Ref matmul(Ref a, Ref b);
    Ref add(Ref a, Ref b);                 // elementwise, same shape
    Ref sub(Ref a, Ref b);
    Ref add_rowvec(Ref x, Ref bias);       // bias is 1 x cols, broadcast over rows
    Ref mul_scalar(Ref x, double c);
    Ref rowscale(Ref x, std::vector<double> c);  // out[i,:] = c[i] * x[i,:]
    Ref activation(Ref x, Act a);
    Ref concat_cols(const std::vector<Ref>& parts);
    Ref clip_rows(Ref x, std::vector<double> lo, std::vector<double> hi);
    Ref square(Ref x);
    Ref min2(Ref a, Ref b);                // elementwise min; ties route grad to a
    Ref sum_all(Ref x);                    // 1x1
    Ref mean_all(Ref x);                   // 1x1

    // Extension point: a node with an arbitrary value and backward rule.
    // `back` must read grad(self) and accumulate into the inputs via
    // accumulate_grad. Inputs whose needs_grad is false may be skipped.
    Ref custom(Mat value, std::vector<Ref> inputs, BackFn back);

    const Mat& value(Ref r) const { return nodes_[check(r)].val; }
    bool needs_grad(Ref r) const { return nodes_[check(r)].needs_grad; }

    // Backpropagate from a 1x1 loss node. Callable once per tape.
    void backward(Ref loss);

    // Gradient of the loss w.r.t. a node (zeros if it never received any).
    const Mat& grad(Ref r) const;
    // dLoss/dparam for every entry of `store` (zeros where unused). Requires a
    // completed backward pass.
    ParamStore grads_for(const ParamStore& store) const;

    void accumulate_grad(Ref r, const Mat& g);
    Mat& grad_buffer(Ref r);  // zero-initialized accumulator for node r
    size_t node_count() const { return nodes_.size(); }
    // True if any trainable leaf of this tape belongs to `store`.
    bool has_params_from(const ParamStore& store) const;

private:
    struct Node {
        Mat val;
        bool needs_grad = false;
        std::vector<Ref> inputs;
        BackFn back;
        const ParamStore* pstore = nullptr;  // set on trainable leaves
        std::string pname;
    };

    Ref push(Node n);
    Ref check(Ref r) const;

    std::vector<Node> nodes_;
    std::vector<Mat> grads_;
    std::map<std::pair<const ParamStore*, std::string>, Ref> param_nodes_;
    std::map<std::pair<const ParamStore*, std::string>, Ref> frozen_nodes_;
    bool backward_done_ = false;
};

// Tape-recorded forward pass. With trainable=false the parameters enter the
// graph as constants and receive no gradient.
Tape::Ref mlp_forward(Tape& tape, const MlpSpec& spec, const ParamStore& params,
                      Tape::Ref input, bool trainable);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    ParamStore m;  // first moments, same layout as the params
    ParamStore v;  // second moments

    static AdamState init(const ParamStore& params, double lr);
};

// Bias-corrected Adam update in place. Throws DivergenceError on a non-finite
// gradient entry.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state);

// Scales grads down to max_norm if their global L2 norm exceeds it. Returns
// the factor applied (1.0 when unchanged).
double clip_global_norm(ParamStore& grads, double max_norm);

}  // namespace mmql
