#include "mwgs/mlp.hpp"

namespace mwgs {

Linear Linear::make(int in, int out, Rng& rng) {
    Linear l;
    l.W = MatX(out, in);
    const double a = std::sqrt(6.0 / (in + out));
    for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) l.W(r, c) = rng.uniform(-a, a);
    l.b = VecX::Zero(out);
    return l;
}

Mlp Mlp::make(const std::vector<int>& widths, bool relu_output, Rng& rng) {
    if (widths.size() < 2) throw InvalidParameter("mlp: need at least input and output widths");
    Mlp m;
    m.relu_output = relu_output;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
        m.layers.push_back(Linear::make(widths[i], widths[i + 1], rng));
    return m;
}

VecX Mlp::forward(const VecX& x, MlpCtx* ctx) const {
    if (x.size() != layers.front().W.cols()) throw InvalidShape("mlp: input width mismatch");
    if (ctx) {
        ctx->input = x;
        ctx->pre.clear();
        ctx->post.clear();
    }
    VecX h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        VecX z = layers[i].W * h + layers[i].b;
        if (ctx) ctx->pre.push_back(z);
        const bool act = (i + 1 < layers.size()) || relu_output;
        h = act ? z.cwiseMax(0.0) : z;
        if (ctx) ctx->post.push_back(h);
    }
    return h;
}

VecX Mlp::backward(const MlpCtx& ctx, const VecX& grad_out, MlpGrad& grads) const {
    VecX g = grad_out;
    for (std::size_t ri = layers.size(); ri-- > 0;) {
        const bool act = (ri + 1 < layers.size()) || relu_output;
        if (act) {
            const VecX& z = ctx.pre[ri];
            for (Eigen::Index i = 0; i < g.size(); ++i)
                if (z[i] <= 0.0) g[i] = 0.0;
        }
        const VecX& in = (ri == 0) ? ctx.input : ctx.post[ri - 1];
        grads.layers[ri].W.noalias() += g * in.transpose();
        grads.layers[ri].b += g;
        g = layers[ri].W.transpose() * g;
    }
    return g;
}

MlpGrad Mlp::zero_grad() const {
    MlpGrad g;
    for (const auto& l : layers) g.layers.push_back(LinearGrad::zeros_like(l));
    return g;
}

}  // namespace mwgs
