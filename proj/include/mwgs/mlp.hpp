#pragma once

#include "mwgs/common.hpp"

namespace mwgs {

struct Linear {
    MatX W;  // out x in
    VecX b;  // out

    static Linear make(int in, int out, Rng& rng);
};

struct LinearGrad {
    MatX W;
    VecX b;

    static LinearGrad zeros_like(const Linear& l) { return {MatX::Zero(l.W.rows(), l.W.cols()), VecX::Zero(l.b.size())}; }
};

struct MlpCtx {
    VecX input;
    std::vector<VecX> pre;   // pre-activation per layer
    std::vector<VecX> post;  // post-activation per layer
};

struct MlpGrad {
    std::vector<LinearGrad> layers;
};

// Dense stack with ReLU between layers; `relu_output` controls whether the
// final layer is activated too.
struct Mlp {
    std::vector<Linear> layers;
    bool relu_output = false;

    static Mlp make(const std::vector<int>& widths, bool relu_output, Rng& rng);

    int in_dim() const { return static_cast<int>(layers.front().W.cols()); }
    int out_dim() const { return static_cast<int>(layers.back().W.rows()); }

    VecX forward(const VecX& x, MlpCtx* ctx = nullptr) const;

    // Accumulates parameter gradients into `grads` and returns the gradient
    // w.r.t. the input.
    VecX backward(const MlpCtx& ctx, const VecX& grad_out, MlpGrad& grads) const;

    MlpGrad zero_grad() const;
};

}  // namespace mwgs
