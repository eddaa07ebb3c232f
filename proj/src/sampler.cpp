#include "mwgs/sampler.hpp"

#include "mwgs/grid.hpp"

namespace mwgs {

int stage_weight_count(int levels) {
    int n = 0;
    for (int m = 0; m <= levels; ++m) n += 1 << (2 * m);
    return n;
}

std::vector<Map3> split_feature_map(const Map3& fmap, int levels) {
    const int pieces = 2 * levels + 2;
    if (fmap.channels % pieces != 0)
        throw InvalidConfig("split_feature_map: channel count not divisible by 2M+2");
    const int width = fmap.channels / pieces;
    std::vector<Map3> chunks;
    chunks.reserve(static_cast<std::size_t>(pieces));
    const std::size_t plane = static_cast<std::size_t>(fmap.height) * fmap.width;
    for (int i = 0; i < pieces; ++i) {
        Map3 c(width, fmap.height, fmap.width);
        std::copy_n(fmap.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * width * plane),
                    static_cast<std::size_t>(width) * plane, c.v.begin());
        chunks.push_back(std::move(c));
    }
    return chunks;
}

FeaturePyramid build_pyramid(const Map3& fmap, int levels, const FilterPair& filters) {
    FeaturePyramid p;
    p.levels = levels;
    p.chunks = split_feature_map(fmap, levels);
    p.chunk_channels = p.chunks.front().channels;
    p.narrow_bands.resize(static_cast<std::size_t>(levels) + 1);
    p.broad_bands.resize(static_cast<std::size_t>(levels) + 1);
    for (int m = 0; m <= levels; ++m) {
        p.narrow_bands[static_cast<std::size_t>(m)] = wavelet_packet(p.chunks[static_cast<std::size_t>(2 * m)], m, filters);
        p.broad_bands[static_cast<std::size_t>(m)] = wavelet_packet(p.chunks[static_cast<std::size_t>(2 * m + 1)], m, filters);
    }
    return p;
}

PyramidGrad PyramidGrad::zeros_like(const FeaturePyramid& p) {
    PyramidGrad g;
    auto mirror = [](const std::vector<std::vector<Map3>>& src) {
        std::vector<std::vector<Map3>> dst(src.size());
        for (std::size_t m = 0; m < src.size(); ++m) {
            dst[m].reserve(src[m].size());
            for (const auto& band : src[m]) dst[m].emplace_back(band.channels, band.height, band.width);
        }
        return dst;
    };
    g.narrow_bands = mirror(p.narrow_bands);
    g.broad_bands = mirror(p.broad_bands);
    return g;
}

Map3 pyramid_backward(const PyramidGrad& grad, const FeaturePyramid& pyramid, const FilterPair& filters) {
    const int pieces = 2 * pyramid.levels + 2;
    const int h = pyramid.chunks.front().height, w = pyramid.chunks.front().width;
    Map3 g_fmap(pyramid.chunk_channels * pieces, h, w);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t chunk_sz = static_cast<std::size_t>(pyramid.chunk_channels) * plane;
    for (int m = 0; m <= pyramid.levels; ++m) {
        const Map3 gn = wavelet_packet_adjoint(grad.narrow_bands[static_cast<std::size_t>(m)], m, filters);
        const Map3 gb = wavelet_packet_adjoint(grad.broad_bands[static_cast<std::size_t>(m)], m, filters);
        std::copy_n(gn.v.begin(), chunk_sz,
                    g_fmap.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(2 * m) * chunk_sz));
        std::copy_n(gb.v.begin(), chunk_sz,
                    g_fmap.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(2 * m + 1) * chunk_sz));
    }
    return g_fmap;
}

MapProjection project_to_map(const Camera& cam, const Vec3& x, int fmap_height, int fmap_width,
                             int level) {
    MapProjection out;
    ProjectedPoint pp;
    if (!try_project_point(cam, x, &pp)) {
        out.excluded = true;
        return out;
    }
    const double sx = static_cast<double>(fmap_width) / cam.width;
    const double sy = static_cast<double>(fmap_height) / cam.height;
    const double scale = std::ldexp(1.0, -level);
    out.coords = {pp.u * sx * scale, pp.v * sy * scale};
    return out;
}

double broad_radius(double r_max, double r_min, double dist) {
    if (!(dist > 0.0)) throw InvalidParameter("broad_radius: zero camera distance");
    return std::max(r_max / dist, r_min);
}

VecX sample_narrow(const Map3& band, const Vec2& p, const MatX& nc, double radius) {
    const int ks = static_cast<int>(nc.rows());
    VecX acc = VecX::Zero(band.channels);
    VecX tmp(band.channels);
    for (int i = 0; i < ks; ++i) {
        const Vec2 pos = p + radius * nc.row(i).transpose().array().tanh().matrix();
        const BilinearTap tap = make_bilinear_tap(band.height, band.width, pos.x(), pos.y());
        bilinear_sample(band, tap, tmp.data());
        acc += tmp;
    }
    return acc / static_cast<double>(ks);
}

VecX sample_broad(const Map3& band, const Vec2& p, const MatX& bc, double broad_r) {
    const int ks = static_cast<int>(bc.rows());
    const double norm = p.norm();
    VecX acc = VecX::Zero(band.channels);
    VecX tmp(band.channels);
    for (int i = 0; i < ks; ++i) {
        Vec2 pos = p;
        if (norm > 0.0) {
            const Vec2 th = bc.row(i).transpose().array().tanh();
            pos = p.cwiseProduct(Vec2::Ones() + (broad_r / norm) * th);
        }
        const BilinearTap tap = make_bilinear_tap(band.height, band.width, pos.x(), pos.y());
        bilinear_sample(band, tap, tmp.data());
        acc += tmp;
    }
    return acc / static_cast<double>(ks);
}

VecX fuse_stage(const std::vector<VecX>& samples, const VecX& logits, VecX* weights) {
    if (static_cast<Eigen::Index>(samples.size()) != logits.size())
        throw InvalidShape("fuse_stage: sample/logit count mismatch");
    const double mx = logits.maxCoeff();
    VecX w = (logits.array() - mx).exp();
    w /= w.sum();
    VecX out = VecX::Zero(samples.front().size());
    for (std::size_t j = 0; j < samples.size(); ++j) out += w[static_cast<Eigen::Index>(j)] * samples[j];
    if (weights) *weights = w;
    return out;
}

namespace {

int stage_offset(int stage) {
    int off = 0;
    for (int m = 0; m < stage; ++m) off += 1 << (2 * m);
    return off;
}

}  // namespace

VecX refine_anchor_features(const FeaturePyramid& pyramid, const Camera& cam, const Anchor& anchor,
                            const SamplerConfig& cfg, AnchorSampleCtx* ctx) {
    const int n_r = pyramid.chunk_channels * (2 * cfg.levels + 2);
    VecX f_r = VecX::Zero(n_r);
    if (ctx) *ctx = AnchorSampleCtx{};

    const MapProjection mp =
        project_to_map(cam, anchor.position, pyramid.chunks.front().height, pyramid.chunks.front().width, 0);
    if (mp.excluded) return f_r;

    const double dist = (anchor.position - cam.position).norm();
    const double broad_r = broad_radius(cfg.broad_r_max, cfg.broad_r_min, dist);

    if (ctx) {
        ctx->visible = true;
        ctx->p0 = mp.coords;
        ctx->t = cam.world_to_camera(anchor.position);
        ctx->dist = dist;
        ctx->broad_r = broad_r;
        ctx->broad_clamped = cfg.broad_r_max / dist < cfg.broad_r_min;
        ctx->narrow_raw.resize(static_cast<std::size_t>(cfg.levels) + 1);
        ctx->broad_raw.resize(static_cast<std::size_t>(cfg.levels) + 1);
        ctx->narrow_w.resize(static_cast<std::size_t>(cfg.levels) + 1);
        ctx->broad_w.resize(static_cast<std::size_t>(cfg.levels) + 1);
    }

    int at = 0;
    for (int m = 0; m <= cfg.levels; ++m) {
        const Vec2 pm = std::ldexp(1.0, -m) * mp.coords;
        const int off = stage_offset(m);
        const int bands = 1 << (2 * m);

        std::vector<VecX> narrow_samples, broad_samples;
        narrow_samples.reserve(static_cast<std::size_t>(bands));
        broad_samples.reserve(static_cast<std::size_t>(bands));
        for (int j = 0; j < bands; ++j) {
            narrow_samples.push_back(sample_narrow(pyramid.narrow_bands[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)],
                                                   pm, anchor.nc, cfg.narrow_radius));
            broad_samples.push_back(sample_broad(pyramid.broad_bands[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)],
                                                 pm, anchor.bc, broad_r));
        }
        VecX wn, wb;
        const VecX fn = fuse_stage(narrow_samples, anchor.omega_narrow.segment(off, bands), &wn);
        const VecX fb = fuse_stage(broad_samples, anchor.omega_broad.segment(off, bands), &wb);
        f_r.segment(at, pyramid.chunk_channels) = fn;
        at += pyramid.chunk_channels;
        f_r.segment(at, pyramid.chunk_channels) = fb;
        at += pyramid.chunk_channels;

        if (ctx) {
            ctx->narrow_raw[static_cast<std::size_t>(m)] = std::move(narrow_samples);
            ctx->broad_raw[static_cast<std::size_t>(m)] = std::move(broad_samples);
            ctx->narrow_w[static_cast<std::size_t>(m)] = wn;
            ctx->broad_w[static_cast<std::size_t>(m)] = wb;
        }
    }
    return f_r;
}

SamplerAnchorGrad refine_anchor_backward(const FeaturePyramid& pyramid, const Camera& cam,
                                         const Anchor& anchor, const SamplerConfig& cfg,
                                         const AnchorSampleCtx& ctx, const VecX& grad_fr,
                                         PyramidGrad& pg) {
    SamplerAnchorGrad out;
    out.nc = MatX::Zero(anchor.nc.rows(), 2);
    out.bc = MatX::Zero(anchor.bc.rows(), 2);
    out.omega_narrow = VecX::Zero(anchor.omega_narrow.size());
    out.omega_broad = VecX::Zero(anchor.omega_broad.size());
    if (!ctx.visible) return out;
    if (grad_fr.size() != pyramid.chunk_channels * (2 * cfg.levels + 2))
        throw InvalidShape("refine_anchor_backward: grad size mismatch");

    const int ks = static_cast<int>(anchor.nc.rows());
    const double inv_ks = 1.0 / static_cast<double>(ks);
    Vec2 g_p0 = Vec2::Zero();
    double g_broad_r = 0.0;

    int at = 0;
    for (int m = 0; m <= cfg.levels; ++m) {
        const Vec2 pm = std::ldexp(1.0, -m) * ctx.p0;
        const int off = stage_offset(m);
        const int bands = 1 << (2 * m);
        const int ch = pyramid.chunk_channels;

        const VecX g_fn = grad_fr.segment(at, ch);
        at += ch;
        const VecX g_fb = grad_fr.segment(at, ch);
        at += ch;

        Vec2 g_pm = Vec2::Zero();

        // fusion backward: softmax weights and per-band sample grads
        const VecX& wn = ctx.narrow_w[static_cast<std::size_t>(m)];
        const VecX& wb = ctx.broad_w[static_cast<std::size_t>(m)];
        VecX sn(bands), sb(bands);
        for (int j = 0; j < bands; ++j) {
            sn[j] = g_fn.dot(ctx.narrow_raw[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)]);
            sb[j] = g_fb.dot(ctx.broad_raw[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)]);
        }
        const double sn_bar = wn.dot(sn), sb_bar = wb.dot(sb);
        for (int j = 0; j < bands; ++j) {
            out.omega_narrow[off + j] += wn[j] * (sn[j] - sn_bar);
            out.omega_broad[off + j] += wb[j] * (sb[j] - sb_bar);
        }

        // per-band, per-sample bilinear adjoints
        VecX g_sample(ch);
        for (int j = 0; j < bands; ++j) {
            const Map3& nband = pyramid.narrow_bands[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)];
            Map3& g_nband = pg.narrow_bands[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)];
            g_sample = (wn[j] * inv_ks) * g_fn;
            for (int i = 0; i < ks; ++i) {
                const Vec2 th = anchor.nc.row(i).transpose().array().tanh();
                const Vec2 pos = pm + cfg.narrow_radius * th;
                const BilinearTap tap = make_bilinear_tap(nband.height, nband.width, pos.x(), pos.y());
                const Vec2 g_pos = bilinear_backward(nband, tap, g_sample.data(), g_nband);
                for (int c2 = 0; c2 < 2; ++c2)
                    out.nc(i, c2) += g_pos[c2] * cfg.narrow_radius * (1.0 - th[c2] * th[c2]);
                g_pm += g_pos;
            }

            const Map3& bband = pyramid.broad_bands[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)];
            Map3& g_bband = pg.broad_bands[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)];
            g_sample = (wb[j] * inv_ks) * g_fb;
            const double pnorm = pm.norm();
            for (int i = 0; i < ks; ++i) {
                Vec2 pos = pm;
                Vec2 th = Vec2::Zero();
                double c = 0.0;
                if (pnorm > 0.0) {
                    th = anchor.bc.row(i).transpose().array().tanh();
                    c = ctx.broad_r / pnorm;
                    pos = pm.cwiseProduct(Vec2::Ones() + c * th);
                }
                const BilinearTap tap = make_bilinear_tap(bband.height, bband.width, pos.x(), pos.y());
                const Vec2 g_pos = bilinear_backward(bband, tap, g_sample.data(), g_bband);
                if (pnorm > 0.0) {
                    const double g_c = g_pos.dot(th.cwiseProduct(pm));
                    for (int c2 = 0; c2 < 2; ++c2) {
                        out.bc(i, c2) += g_pos[c2] * pm[c2] * c * (1.0 - th[c2] * th[c2]);
                        g_pm[c2] += g_pos[c2] * (1.0 + c * th[c2]);
                    }
                    g_pm += g_c * (-ctx.broad_r / (pnorm * pnorm * pnorm)) * pm;
                    g_broad_r += g_c / pnorm;
                } else {
                    g_pm += g_pos;
                }
            }
        }
        g_p0 += std::ldexp(1.0, -m) * g_pm;
    }

    // broad radius chain: R = r_max / dist when unclamped
    if (!ctx.broad_clamped) {
        const double g_dist = -cfg.broad_r_max / (ctx.dist * ctx.dist) * g_broad_r;
        out.position += g_dist * (anchor.position - cam.position) / ctx.dist;
    }

    // p0 = (u sx, v sy) through the pinhole projection
    const double sx = static_cast<double>(pyramid.chunks.front().width) / cam.width;
    const double sy = static_cast<double>(pyramid.chunks.front().height) / cam.height;
    const Vec2 g_uv(g_p0.x() * sx, g_p0.y() * sy);
    const Eigen::Matrix<double, 2, 3> J = projection_jacobian(cam, ctx.t);
    const Vec3 g_t = J.transpose() * g_uv;
    out.position += cam.rotation().transpose() * g_t;
    return out;
}

Plane dump_attention(const FeaturePyramid& pyramid, const Camera& cam,
                     const std::vector<Anchor>& anchors, const SamplerConfig& cfg,
                     int fmap_height, int fmap_width) {
    Plane hist(fmap_height, fmap_width);
    for (const auto& anchor : anchors) {
        const MapProjection mp = project_to_map(cam, anchor.position, fmap_height, fmap_width, 0);
        if (mp.excluded) continue;
        const double dist = (anchor.position - cam.position).norm();
        const double broad_r = broad_radius(cfg.broad_r_max, cfg.broad_r_min, dist);
        const int ks = static_cast<int>(anchor.nc.rows());
        for (int m = 0; m <= cfg.levels; ++m) {
            const Vec2 pm = std::ldexp(1.0, -m) * mp.coords;
            const int bands = 1 << (2 * m);
            const double up = std::ldexp(1.0, m);
            const double pnorm = pm.norm();
            for (int j = 0; j < bands; ++j) {
                for (int i = 0; i < ks; ++i) {
                    const Vec2 th_n = anchor.nc.row(i).transpose().array().tanh();
                    const Vec2 narrow_pos = (pm + cfg.narrow_radius * th_n) * up;
                    Vec2 broad_pos = pm;
                    if (pnorm > 0.0) {
                        const Vec2 th_b = anchor.bc.row(i).transpose().array().tanh();
                        broad_pos = pm.cwiseProduct(Vec2::Ones() + (broad_r / pnorm) * th_b);
                    }
                    broad_pos *= up;
                    for (const Vec2& pos : {narrow_pos, broad_pos}) {
                        const int bx = std::clamp(static_cast<int>(std::floor(pos.x())), 0, fmap_width - 1);
                        const int by = std::clamp(static_cast<int>(std::floor(pos.y())), 0, fmap_height - 1);
                        hist.at(by, bx) += 1.0;
                    }
                }
            }
        }
    }
    return hist;
}

}  // namespace mwgs
