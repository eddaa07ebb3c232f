#include "mwgs/encoder.hpp"

namespace mwgs {

Conv2d Conv2d::make(int in_ch, int out_ch, int stride, Rng& rng) {
    Conv2d c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.stride = stride;
    c.w.resize(static_cast<std::size_t>(out_ch) * in_ch * 9);
    const double a = std::sqrt(6.0 / (in_ch * 9 + out_ch * 9));
    for (auto& x : c.w) x = rng.uniform(-a, a);
    c.b = VecX::Zero(out_ch);
    return c;
}

Map3 Conv2d::forward(const Map3& x) const {
    if (x.channels != in_ch) throw InvalidShape("conv2d: channel mismatch");
    const int oh = (x.height + 2 - 3) / stride + 1;
    const int ow = (x.width + 2 - 3) / stride + 1;
    Map3 y(out_ch, oh, ow);
    for (int oc = 0; oc < out_ch; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b[oc];
                for (int ic = 0; ic < in_ch; ++ic) {
                    const std::size_t wb = (static_cast<std::size_t>(oc) * in_ch + ic) * 9;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = oy * stride + ky - 1;
                        if (iy < 0 || iy >= x.height) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = ox * stride + kx - 1;
                            if (ix < 0 || ix >= x.width) continue;
                            acc += w[wb + static_cast<std::size_t>(ky) * 3 + kx] * x.at(ic, iy, ix);
                        }
                    }
                }
                y.at(oc, oy, ox) = acc;
            }
        }
    }
    return y;
}

Map3 conv2d_backward(const Conv2d& c, const Map3& x, const Map3& g_out, Conv2dGrad& g) {
    Map3 g_in(x.channels, x.height, x.width);
    for (int oc = 0; oc < c.out_ch; ++oc) {
        for (int oy = 0; oy < g_out.height; ++oy) {
            for (int ox = 0; ox < g_out.width; ++ox) {
                const double go = g_out.at(oc, oy, ox);
                if (go == 0.0) continue;
                g.b[oc] += go;
                for (int ic = 0; ic < c.in_ch; ++ic) {
                    const std::size_t wb = (static_cast<std::size_t>(oc) * c.in_ch + ic) * 9;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = oy * c.stride + ky - 1;
                        if (iy < 0 || iy >= x.height) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = ox * c.stride + kx - 1;
                            if (ix < 0 || ix >= x.width) continue;
                            const std::size_t wi = wb + static_cast<std::size_t>(ky) * 3 + kx;
                            g.w[wi] += go * x.at(ic, iy, ix);
                            g_in.at(ic, iy, ix) += go * c.w[wi];
                        }
                    }
                }
            }
        }
    }
    return g_in;
}

Map3 upsample2x(const Map3& x) {
    Map3 y(x.channels, x.height * 2, x.width * 2);
    for (int c = 0; c < x.channels; ++c)
        for (int yy = 0; yy < y.height; ++yy)
            for (int xx = 0; xx < y.width; ++xx) y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
    return y;
}

Map3 upsample2x_backward(const Map3& g_out) {
    Map3 g(g_out.channels, g_out.height / 2, g_out.width / 2);
    for (int c = 0; c < g_out.channels; ++c)
        for (int yy = 0; yy < g_out.height; ++yy)
            for (int xx = 0; xx < g_out.width; ++xx) g.at(c, yy / 2, xx / 2) += g_out.at(c, yy, xx);
    return g;
}

VecX global_feature(const Map3& f_enc, const Mlp& mlp_g, MlpCtx* ctx, VecX* pooled_out) {
    if (f_enc.size() == 0) throw InvalidShape("global_feature: empty map");
    VecX pooled = VecX::Zero(f_enc.channels);
    const double inv = 1.0 / (static_cast<double>(f_enc.height) * f_enc.width);
    for (int c = 0; c < f_enc.channels; ++c) {
        double acc = 0.0;
        for (int y = 0; y < f_enc.height; ++y)
            for (int x = 0; x < f_enc.width; ++x) acc += f_enc.at(c, y, x);
        pooled[c] = acc * inv;
    }
    if (pooled_out) *pooled_out = pooled;
    return mlp_g.forward(pooled, ctx);
}

namespace {
constexpr int kEncCh1 = 16, kEncCh2 = 24, kEncCh3 = 32, kVmCh1 = 16, kVmCh2 = 8;
}

AppearanceEncoder AppearanceEncoder::make(const EncoderConfig& cfg, int image_count, Rng& rng) {
    AppearanceEncoder e;
    e.cfg_ = cfg;
    e.image_count_ = image_count;
    if (cfg.mode == EncoderMode::Grid) {
        for (int i = 0; i < image_count; ++i) {
            Map3 fmap(cfg.n_r, cfg.fmap_height, cfg.fmap_width);
            for (auto& x : fmap.v) x = rng.uniform(-0.1, 0.1);
            e.grid_fmap_.push_back(std::move(fmap));
            e.grid_fmap_grad_.emplace_back(cfg.n_r, cfg.fmap_height, cfg.fmap_width);
            e.grid_vm_logits_.emplace_back(cfg.image_height, cfg.image_width);
            e.grid_vm_logits_grad_.emplace_back(cfg.image_height, cfg.image_width);
        }
        e.mlp_g_ = Mlp::make({cfg.n_r, 2 * cfg.n_g, cfg.n_g}, false, rng);
    } else {
        if (cfg.image_height % 8 != 0 || cfg.image_width % 8 != 0)
            throw InvalidConfig("conv encoder requires image dims divisible by 8");
        if (cfg.fmap_height != cfg.image_height / 2 || cfg.fmap_width != cfg.image_width / 2)
            throw InvalidConfig("conv encoder emits the feature map at image/2 resolution");
        e.enc_.push_back(Conv2d::make(3, kEncCh1, 2, rng));
        e.enc_.push_back(Conv2d::make(kEncCh1, kEncCh2, 2, rng));
        e.enc_.push_back(Conv2d::make(kEncCh2, kEncCh3, 2, rng));
        e.dec_fmap_.push_back(Conv2d::make(kEncCh3, kEncCh2, 1, rng));
        e.dec_fmap_.push_back(Conv2d::make(kEncCh2, cfg.n_r, 1, rng));
        e.dec_vm_.push_back(Conv2d::make(kEncCh3, kVmCh1, 1, rng));
        e.dec_vm_.push_back(Conv2d::make(kVmCh1, kVmCh2, 1, rng));
        e.dec_vm_.push_back(Conv2d::make(kVmCh2, 1, 1, rng));
        for (const auto& c : e.enc_) e.enc_grad_.push_back(Conv2dGrad::zeros_like(c));
        for (const auto& c : e.dec_fmap_) e.dec_fmap_grad_.push_back(Conv2dGrad::zeros_like(c));
        for (const auto& c : e.dec_vm_) e.dec_vm_grad_.push_back(Conv2dGrad::zeros_like(c));
        e.mlp_g_ = Mlp::make({kEncCh3, 2 * cfg.n_g, cfg.n_g}, false, rng);
    }
    e.mlp_g_grad_ = e.mlp_g_.zero_grad();
    return e;
}

AppearanceBundle AppearanceEncoder::encode(int image_id, const ImageRGB* image, EncodeCtx* ctx) const {
    AppearanceBundle out;
    if (cfg_.mode == EncoderMode::Grid) {
        if (image_id < 0 || image_id >= image_count_)
            throw MissingEntry("grid encoder: unknown image id " + std::to_string(image_id));
        const auto& fmap = grid_fmap_[static_cast<std::size_t>(image_id)];
        const auto& logits = grid_vm_logits_[static_cast<std::size_t>(image_id)];
        out.fmap = fmap;
        out.vm = Plane(logits.height, logits.width);
        for (std::size_t i = 0; i < logits.v.size(); ++i) out.vm.v[i] = sigmoid(logits.v[i]);
        MlpCtx mctx;
        VecX pooled;
        out.f_g = global_feature(fmap, mlp_g_, &mctx, &pooled);
        if (ctx) {
            ctx->image_id = image_id;
            ctx->mlp_g = std::move(mctx);
            ctx->pooled = pooled;
            ctx->fmap = out.fmap;
            ctx->vm = out.vm;
        }
        return out;
    }

    // conv mode
    if (image == nullptr) throw InvalidParameter("conv encoder: reference image required");
    if (image_id >= image_count_) throw MissingEntry("conv encoder: unknown image id");
    if (image->height != cfg_.image_height || image->width != cfg_.image_width)
        throw InvalidShape("conv encoder: reference image dims disagree with config");

    Map3 x(3, image->height, image->width);
    for (int y = 0; y < image->height; ++y)
        for (int xx = 0; xx < image->width; ++xx)
            for (int c = 0; c < 3; ++c) x.at(c, y, xx) = image->at(y, xx, c);

    std::vector<Map3> inputs;  // pre-conv input of every conv, in eval order
    auto run_conv = [&inputs](const Conv2d& c, Map3 in, bool relu) {
        inputs.push_back(in);
        Map3 y = c.forward(in);
        if (relu)
            for (auto& v : y.v) v = std::max(v, 0.0);
        return y;
    };

    Map3 h = std::move(x);
    for (const auto& c : enc_) h = run_conv(c, std::move(h), true);
    const Map3 f_enc = h;

    Map3 a = upsample2x(f_enc);
    a = run_conv(dec_fmap_[0], std::move(a), true);
    a = upsample2x(a);
    a = run_conv(dec_fmap_[1], std::move(a), false);
    out.fmap = std::move(a);

    Map3 b = upsample2x(f_enc);
    b = run_conv(dec_vm_[0], std::move(b), true);
    b = upsample2x(b);
    b = run_conv(dec_vm_[1], std::move(b), true);
    b = upsample2x(b);
    b = run_conv(dec_vm_[2], std::move(b), false);

    out.vm = Plane(cfg_.image_height, cfg_.image_width);
    for (std::size_t i = 0; i < out.vm.v.size(); ++i) out.vm.v[i] = sigmoid(b.v[i]);

    MlpCtx mctx;
    VecX pooled;
    out.f_g = global_feature(f_enc, mlp_g_, &mctx, &pooled);

    if (ctx) {
        ctx->image_id = image_id;
        ctx->mlp_g = std::move(mctx);
        ctx->pooled = pooled;
        ctx->fmap = out.fmap;
        ctx->vm = out.vm;
        ctx->conv_inputs = std::move(inputs);
        ctx->f_enc = f_enc;
    }
    return out;
}

void AppearanceEncoder::encode_backward(const EncodeCtx& ctx, const VecX& g_fg, const Map3& g_fmap,
                                        const Plane& g_vm) {
    // global-feature path: MLP^G then spread the pooled mean.
    VecX g_pooled = mlp_g_.backward(ctx.mlp_g, g_fg, mlp_g_grad_);

    if (cfg_.mode == EncoderMode::Grid) {
        auto& gm = grid_fmap_grad_[static_cast<std::size_t>(ctx.image_id)];
        if (!gm.same_shape(g_fmap)) throw InvalidShape("encode_backward: fmap grad shape");
        const double inv = 1.0 / (static_cast<double>(gm.height) * gm.width);
        for (int c = 0; c < gm.channels; ++c) {
            const double gp = g_pooled[c] * inv;
            for (int y = 0; y < gm.height; ++y)
                for (int x = 0; x < gm.width; ++x) gm.at(c, y, x) += g_fmap.at(c, y, x) + gp;
        }
        auto& gl = grid_vm_logits_grad_[static_cast<std::size_t>(ctx.image_id)];
        for (std::size_t i = 0; i < gl.v.size(); ++i) {
            const double s = ctx.vm.v[i];
            gl.v[i] += g_vm.v[i] * s * (1.0 - s);
        }
        return;
    }

    // conv mode. conv_inputs, in eval order:
    //   [0] image  [1] enc1 in  [2] enc2 in
    //   [3] fmap-head up(f_enc)  [4] fmap-head stage-2 in
    //   [5] vm-head up(f_enc)    [6] vm-head stage-2 in  [7] vm-head stage-3 in
    // Post-ReLU tensors are all >= 0, so masking against a stored
    // activation (or its nearest upsampled copy) recovers the ReLU mask.
    auto relu_mask = [](const Map3& post, Map3& g) {
        for (std::size_t i = 0; i < g.v.size(); ++i)
            if (post.v[i] <= 0.0) g.v[i] = 0.0;
    };
    const auto& in = ctx.conv_inputs;

    // vm head
    Map3 g_logits(1, cfg_.image_height, cfg_.image_width);
    for (std::size_t i = 0; i < g_logits.v.size(); ++i) {
        const double s = ctx.vm.v[i];
        g_logits.v[i] = g_vm.v[i] * s * (1.0 - s);
    }
    Map3 g = conv2d_backward(dec_vm_[2], in[7], g_logits, dec_vm_grad_[2]);
    relu_mask(in[7], g);
    g = upsample2x_backward(g);
    g = conv2d_backward(dec_vm_[1], in[6], g, dec_vm_grad_[1]);
    relu_mask(in[6], g);
    g = upsample2x_backward(g);
    g = conv2d_backward(dec_vm_[0], in[5], g, dec_vm_grad_[0]);
    Map3 g_fenc = upsample2x_backward(g);

    // fmap head
    Map3 ga = conv2d_backward(dec_fmap_[1], in[4], g_fmap, dec_fmap_grad_[1]);
    relu_mask(in[4], ga);
    ga = upsample2x_backward(ga);
    ga = conv2d_backward(dec_fmap_[0], in[3], ga, dec_fmap_grad_[0]);
    {
        const Map3 tmp = upsample2x_backward(ga);
        for (std::size_t i = 0; i < g_fenc.v.size(); ++i) g_fenc.v[i] += tmp.v[i];
    }

    // pooled-mean path joins at the encoder output
    {
        const double inv = 1.0 / (static_cast<double>(g_fenc.height) * g_fenc.width);
        for (int c = 0; c < g_fenc.channels; ++c) {
            const double gp = g_pooled[c] * inv;
            for (int y = 0; y < g_fenc.height; ++y)
                for (int x = 0; x < g_fenc.width; ++x) g_fenc.at(c, y, x) += gp;
        }
    }

    // shared encoder
    relu_mask(ctx.f_enc, g_fenc);
    Map3 gh = conv2d_backward(enc_[2], in[2], g_fenc, enc_grad_[2]);
    relu_mask(in[2], gh);
    gh = conv2d_backward(enc_[1], in[1], gh, enc_grad_[1]);
    relu_mask(in[1], gh);
    conv2d_backward(enc_[0], in[0], gh, enc_grad_[0]);
}

void AppearanceEncoder::collect_params(std::vector<ParamEntry>& out) {
    auto add = [&out](const std::string& name, double* v, double* g, std::size_t n) {
        out.push_back({name, ParamGroup::Encoder, v, g, n});
    };
    if (cfg_.mode == EncoderMode::Grid) {
        for (int i = 0; i < image_count_; ++i) {
            const auto tag = std::to_string(i);
            add("encoder/img" + tag + "/fmap", grid_fmap_[static_cast<std::size_t>(i)].v.data(),
                grid_fmap_grad_[static_cast<std::size_t>(i)].v.data(), grid_fmap_[static_cast<std::size_t>(i)].v.size());
            add("encoder/img" + tag + "/vm_logits", grid_vm_logits_[static_cast<std::size_t>(i)].v.data(),
                grid_vm_logits_grad_[static_cast<std::size_t>(i)].v.data(),
                grid_vm_logits_[static_cast<std::size_t>(i)].v.size());
        }
    } else {
        auto add_conv = [&add](const std::string& name, std::vector<Conv2d>& cs, std::vector<Conv2dGrad>& gs) {
            for (std::size_t i = 0; i < cs.size(); ++i) {
                const auto tag = name + std::to_string(i);
                add(tag + "/w", cs[i].w.data(), gs[i].w.data(), cs[i].w.size());
                add(tag + "/b", cs[i].b.data(), gs[i].b.data(), static_cast<std::size_t>(cs[i].b.size()));
            }
        };
        add_conv("encoder/enc", enc_, enc_grad_);
        add_conv("encoder/dec_fmap", dec_fmap_, dec_fmap_grad_);
        add_conv("encoder/dec_vm", dec_vm_, dec_vm_grad_);
    }
    for (std::size_t i = 0; i < mlp_g_.layers.size(); ++i) {
        const auto tag = "encoder/mlp_g/" + std::to_string(i);
        add(tag + "/W", mlp_g_.layers[i].W.data(), mlp_g_grad_.layers[i].W.data(),
            static_cast<std::size_t>(mlp_g_.layers[i].W.size()));
        add(tag + "/b", mlp_g_.layers[i].b.data(), mlp_g_grad_.layers[i].b.data(),
            static_cast<std::size_t>(mlp_g_.layers[i].b.size()));
    }
}

void AppearanceEncoder::zero_grads() {
    for (auto& g : grid_fmap_grad_) g.fill(0.0);
    for (auto& g : grid_vm_logits_grad_) g.fill(0.0);
    for (auto& g : enc_grad_) { std::fill(g.w.begin(), g.w.end(), 0.0); g.b.setZero(); }
    for (auto& g : dec_fmap_grad_) { std::fill(g.w.begin(), g.w.end(), 0.0); g.b.setZero(); }
    for (auto& g : dec_vm_grad_) { std::fill(g.w.begin(), g.w.end(), 0.0); g.b.setZero(); }
    for (auto& g : mlp_g_grad_.layers) { g.W.setZero(); g.b.setZero(); }
}

}  // namespace mwgs
