#include "mwgs/hrfn.hpp"

namespace mwgs {

VecX positional_encode(const Vec3& x, int bands) {
    if (bands < 0) throw InvalidParameter("positional_encode: negative band count");
    VecX out(3 + 6 * bands);
    out.head<3>() = x;
    int at = 3;
    for (int l = 0; l < bands; ++l) {
        const double f = std::ldexp(M_PI, l);  // 2^l pi
        for (int c = 0; c < 3; ++c) {
            out[at++] = std::sin(f * x[c]);
            out[at++] = std::cos(f * x[c]);
        }
    }
    return out;
}

Vec3 positional_encode_backward(const Vec3& x, int bands, const VecX& grad_out) {
    Vec3 g = grad_out.head<3>();
    int at = 3;
    for (int l = 0; l < bands; ++l) {
        const double f = std::ldexp(M_PI, l);
        for (int c = 0; c < 3; ++c) {
            g[c] += grad_out[at++] * f * std::cos(f * x[c]);
            g[c] -= grad_out[at++] * f * std::sin(f * x[c]);
        }
    }
    return g;
}

Hrfn Hrfn::make(const HrfnConfig& cfg, Rng& rng) {
    Hrfn h;
    h.cfg_ = cfg;
    const int pe = 3 + 6 * cfg.pe_bands;
    const int in1 = pe + cfg.n_v + cfg.n_r + cfg.n_g;
    h.m1_ = Mlp::make({in1, 128, 96}, true, rng);
    h.m2_ = Mlp::make({96 + cfg.n_r + cfg.n_v, 96, 64}, true, rng);
    h.m3_ = Mlp::make({64, 48, 48}, true, rng);
    h.m4_ = Mlp::make({48 + 3, 48, 3 * cfg.k}, false, rng);
    h.zero_grads();
    return h;
}

VecX Hrfn::forward(const Vec3& x_i, const Vec3& cam_center, const VecX& f_v, const VecX& f_r,
                   const VecX& f_g, HrfnCtx* ctx, double omega_r_mult, double omega_v_mult) const {
    if (f_v.size() != cfg_.n_v || f_r.size() != cfg_.n_r || f_g.size() != cfg_.n_g)
        throw InvalidConfig("hrfn: feature dimensions disagree with config");
    const Vec3 u = x_i - cam_center;
    const double dist = u.norm();
    if (!(dist > 0.0)) throw InvalidParameter("hrfn: anchor coincides with camera center");
    const Vec3 d_ic = u / dist;

    const VecX pe = positional_encode(x_i, cfg_.pe_bands);
    VecX in1(pe.size() + cfg_.n_v + cfg_.n_r + cfg_.n_g);
    in1 << pe, f_v, f_r, f_g;

    MlpCtx c1, c2, c3, c4;
    const VecX h1 = m1_.forward(in1, &c1);

    const double wr = omega_r * omega_r_mult;
    const double wv = omega_v * omega_v_mult;
    VecX in2(h1.size() + cfg_.n_r + cfg_.n_v);
    in2 << h1, wr * f_r, wv * f_v;

    const VecX h2 = m2_.forward(in2, &c2);
    const VecX h3 = m3_.forward(h2, &c3);
    VecX in4(h3.size() + 3);
    in4 << h3, d_ic;
    const VecX logits = m4_.forward(in4, &c4);

    VecX colors(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) colors[i] = sigmoid(logits[i]);

    if (ctx) {
        ctx->x_i = x_i;
        ctx->d_ic = d_ic;
        ctx->dist = dist;
        ctx->f_v = f_v;
        ctx->f_r = f_r;
        ctx->f_g = f_g;
        ctx->m1 = std::move(c1);
        ctx->m2 = std::move(c2);
        ctx->m3 = std::move(c3);
        ctx->m4 = std::move(c4);
        ctx->colors = colors;
        ctx->omega_r_mult = omega_r_mult;
        ctx->omega_v_mult = omega_v_mult;
    }
    return colors;
}

HrfnBackwardResult Hrfn::backward(const HrfnCtx& ctx, const VecX& grad_colors) {
    if (grad_colors.size() != 3 * cfg_.k) throw InvalidShape("hrfn backward: color grad size");

    VecX g_logits(grad_colors.size());
    for (Eigen::Index i = 0; i < grad_colors.size(); ++i) {
        const double s = ctx.colors[i];
        g_logits[i] = grad_colors[i] * s * (1.0 - s);
    }

    const VecX g_in4 = m4_.backward(ctx.m4, g_logits, grads_.m4);
    const int h3_dim = static_cast<int>(g_in4.size()) - 3;
    const VecX g_h3 = g_in4.head(h3_dim);
    const Vec3 g_dic = g_in4.tail<3>();

    const VecX g_h2 = m3_.backward(ctx.m3, g_h3, grads_.m3);
    const VecX g_in2 = m2_.backward(ctx.m2, g_h2, grads_.m2);

    const int h1_dim = static_cast<int>(g_in2.size()) - cfg_.n_r - cfg_.n_v;
    const VecX g_h1 = g_in2.head(h1_dim);
    const VecX g_wrfr = g_in2.segment(h1_dim, cfg_.n_r);
    const VecX g_wvfv = g_in2.tail(cfg_.n_v);

    const double wr = omega_r * ctx.omega_r_mult;
    const double wv = omega_v * ctx.omega_v_mult;
    grads_.omega_r += ctx.omega_r_mult * g_wrfr.dot(ctx.f_r);
    grads_.omega_v += ctx.omega_v_mult * g_wvfv.dot(ctx.f_v);

    const VecX g_in1 = m1_.backward(ctx.m1, g_h1, grads_.m1);
    const int pe_dim = 3 + 6 * cfg_.pe_bands;

    HrfnBackwardResult out;
    out.f_v = g_in1.segment(pe_dim, cfg_.n_v) + wv * g_wvfv;
    out.f_r = g_in1.segment(pe_dim + cfg_.n_v, cfg_.n_r) + wr * g_wrfr;
    out.f_g = g_in1.tail(cfg_.n_g);

    out.x_i = positional_encode_backward(ctx.x_i, cfg_.pe_bands, g_in1.head(pe_dim));
    // d_ic = u/|u| with u = x_i - x_c
    out.x_i += (Mat3::Identity() - ctx.d_ic * ctx.d_ic.transpose()) * g_dic / ctx.dist;
    return out;
}

void Hrfn::collect_params(std::vector<ParamEntry>& out) {
    auto add_mlp = [&out](const std::string& base, Mlp& m, MlpGrad& g) {
        for (std::size_t i = 0; i < m.layers.size(); ++i) {
            const auto tag = base + "/" + std::to_string(i);
            out.push_back({tag + "/W", ParamGroup::Hrfn, m.layers[i].W.data(), g.layers[i].W.data(),
                           static_cast<std::size_t>(m.layers[i].W.size())});
            out.push_back({tag + "/b", ParamGroup::Hrfn, m.layers[i].b.data(), g.layers[i].b.data(),
                           static_cast<std::size_t>(m.layers[i].b.size())});
        }
    };
    add_mlp("hrfn/m1", m1_, grads_.m1);
    add_mlp("hrfn/m2", m2_, grads_.m2);
    add_mlp("hrfn/m3", m3_, grads_.m3);
    add_mlp("hrfn/m4", m4_, grads_.m4);
    out.push_back({"hrfn/omega_r", ParamGroup::Hrfn, &omega_r, &grads_.omega_r, 1});
    out.push_back({"hrfn/omega_v", ParamGroup::Hrfn, &omega_v, &grads_.omega_v, 1});
}

void Hrfn::zero_grads() {
    grads_.m1 = m1_.zero_grad();
    grads_.m2 = m2_.zero_grad();
    grads_.m3 = m3_.zero_grad();
    grads_.m4 = m4_.zero_grad();
    grads_.omega_r = 0.0;
    grads_.omega_v = 0.0;
}

}  // namespace mwgs
