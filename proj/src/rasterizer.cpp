#include "mwgs/rasterizer.hpp"

#include <algorithm>
#include <numeric>

namespace mwgs {

namespace {

double max_eigenvalue_2x2(const Mat2& m) {
    const double tr = m(0, 0) + m(1, 1);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = std::max(0.0, tr * tr * 0.25 - det);
    return tr * 0.5 + std::sqrt(disc);
}

Vec2 pixel_center(int x, int y) { return {x + 0.5, y + 0.5}; }

struct PixelSplatEval {
    double gauss = 0.0;       // exp(-0.5 d^T conic d)
    double alpha = 0.0;       // post-clamp
    bool clamped = false;
    bool gated = false;       // outside the 3-sigma box, contributes nothing
    Vec2 d = Vec2::Zero();
};

inline PixelSplatEval eval_splat_at(const Splat2D& s, const Vec2& p) {
    PixelSplatEval e;
    e.d = p - s.mean2d;
    if (std::abs(e.d.x()) > s.radius || std::abs(e.d.y()) > s.radius) {
        e.gated = true;
        return e;
    }
    const double power = -0.5 * e.d.dot(s.conic * e.d);
    e.gauss = std::exp(power);
    const double raw = s.opacity * e.gauss;
    e.clamped = raw > kAlphaClamp;
    e.alpha = e.clamped ? kAlphaClamp : raw;
    return e;
}

}  // namespace

std::optional<Splat2D> project_gaussian(const Camera& cam, const GaussianPrimitive& g,
                                        int width, int height, double dilation) {
    const Mat3 W = cam.rotation();
    const Vec3 t = W * (g.mean - cam.position);
    if (!(t.z() > kNearPlane)) return std::nullopt;

    const Eigen::Matrix<double, 2, 3> J = projection_jacobian(cam, t);
    const Eigen::Matrix<double, 2, 3> M = J * W;
    Mat2 cov = M * g.covariance * M.transpose();
    cov(0, 0) += dilation;
    cov(1, 1) += dilation;

    Splat2D s;
    s.mean2d = {cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy};
    s.cov2d = cov;
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (!(det > 0.0) || !cov.allFinite()) return std::nullopt;
    s.conic << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;
    s.depth = t.z();
    s.opacity = g.opacity;
    s.color = g.color;
    s.radius = 3.0 * std::sqrt(max_eigenvalue_2x2(cov));

    if (s.mean2d.x() + s.radius < 0.0 || s.mean2d.x() - s.radius > width ||
        s.mean2d.y() + s.radius < 0.0 || s.mean2d.y() - s.radius > height)
        return std::nullopt;
    return s;
}

Vec3 composite_pixel(std::span<const Splat2D> sorted, const Vec2& p, const Vec3& background) {
    Vec3 color = Vec3::Zero();
    double T = 1.0;
    for (const auto& s : sorted) {
        const PixelSplatEval e = eval_splat_at(s, p);
        if (e.gated) continue;
        color += s.color * (e.alpha * T);
        T *= 1.0 - e.alpha;
        if (T < kTransmittanceStop) break;
    }
    return color + T * background;
}

RenderBuffers render(const Camera& cam, const std::vector<GaussianPrimitive>& gaussians,
                     const std::vector<SplatSource>& sources, const RenderConfig& cfg) {
    cam.validate();
    if (cfg.tile_size < 1) throw InvalidParameter("render: tile_size must be >= 1");
    if (gaussians.size() != sources.size()) throw InvalidShape("render: gaussians/sources size mismatch");

    RenderBuffers buf;
    buf.width = cam.width;
    buf.height = cam.height;
    buf.tile_size = cfg.tile_size;
    buf.background = cfg.background;
    buf.image = ImageRGB(cam.height, cam.width);
    buf.depth = Plane(cam.height, cam.width);
    buf.final_transmittance = Plane(cam.height, cam.width);
    buf.n_contrib.assign(static_cast<std::size_t>(cam.height) * cam.width, 0);
    buf.splat_of_input.assign(gaussians.size(), -1);

    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        auto s = project_gaussian(cam, gaussians[i], cam.width, cam.height);
        if (!s) continue;
        s->anchor_id = sources[i].anchor_id;
        s->offset_id = sources[i].offset_id;
        s->input_index = static_cast<int>(i);
        buf.splats.push_back(*s);
    }
    std::sort(buf.splats.begin(), buf.splats.end(), [](const Splat2D& a, const Splat2D& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        if (a.anchor_id != b.anchor_id) return a.anchor_id < b.anchor_id;
        return a.offset_id < b.offset_id;
    });
    for (std::size_t si = 0; si < buf.splats.size(); ++si)
        buf.splat_of_input[static_cast<std::size_t>(buf.splats[si].input_index)] = static_cast<int>(si);

    const int ts = cfg.tile_size;
    buf.tiles_x = (cam.width + ts - 1) / ts;
    buf.tiles_y = (cam.height + ts - 1) / ts;
    buf.tile_lists.assign(static_cast<std::size_t>(buf.tiles_x) * buf.tiles_y, {});
    for (std::size_t si = 0; si < buf.splats.size(); ++si) {
        const auto& s = buf.splats[si];
        const int tx0 = std::max(0, static_cast<int>(std::floor((s.mean2d.x() - s.radius) / ts)));
        const int tx1 = std::min(buf.tiles_x - 1, static_cast<int>(std::floor((s.mean2d.x() + s.radius) / ts)));
        const int ty0 = std::max(0, static_cast<int>(std::floor((s.mean2d.y() - s.radius) / ts)));
        const int ty1 = std::min(buf.tiles_y - 1, static_cast<int>(std::floor((s.mean2d.y() + s.radius) / ts)));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                buf.tile_lists[static_cast<std::size_t>(ty) * buf.tiles_x + tx].push_back(static_cast<int>(si));
    }

    const std::size_t tile_count = buf.tile_lists.size();
    parallel_for(tile_count, cfg.threads, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % buf.tiles_x;
        const int ty = static_cast<int>(tile) / buf.tiles_x;
        const auto& list = buf.tile_lists[tile];
        const int x_end = std::min(cam.width, (tx + 1) * ts);
        const int y_end = std::min(cam.height, (ty + 1) * ts);
        for (int y = ty * ts; y < y_end; ++y) {
            for (int x = tx * ts; x < x_end; ++x) {
                const Vec2 p = pixel_center(x, y);
                Vec3 color = Vec3::Zero();
                double depth_acc = 0.0;
                double T = 1.0;
                int contributed = 0;
                for (const int si : list) {
                    const auto& s = buf.splats[static_cast<std::size_t>(si)];
                    const PixelSplatEval e = eval_splat_at(s, p);
                    if (e.gated) continue;
                    color += s.color * (e.alpha * T);
                    depth_acc += s.depth * e.alpha * T;
                    T *= 1.0 - e.alpha;
                    ++contributed;
                    if (T < kTransmittanceStop) break;
                }
                color += T * cfg.background;
                for (int c = 0; c < 3; ++c) buf.image.at(y, x, c) = color[c];
                buf.depth.at(y, x) = depth_acc;
                buf.final_transmittance.at(y, x) = T;
                buf.n_contrib[static_cast<std::size_t>(y) * cam.width + x] = contributed;
            }
        }
    });
    return buf;
}

namespace {

struct SplatGradAccum {
    Vec3 color = Vec3::Zero();
    double opacity = 0.0;
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();
};

}  // namespace

std::vector<GaussianGrad> render_backward(const Camera& cam,
                                          const std::vector<GaussianPrimitive>& gaussians,
                                          const RenderBuffers& buffers,
                                          const ImageRGB& grad_image, int threads) {
    if (grad_image.height != buffers.height || grad_image.width != buffers.width)
        throw InvalidParameter("render_backward: grad image shape mismatch");
    if (buffers.splat_of_input.size() != gaussians.size())
        throw InvalidParameter("render_backward: buffers do not match input gaussians");

    const int ts = buffers.tile_size;
    const std::size_t tile_count = buffers.tile_lists.size();

    // Per-tile gradient buffers, reduced sequentially in tile order below so
    // the result is independent of the thread count.
    std::vector<std::vector<SplatGradAccum>> tile_grads(tile_count);

    parallel_for(tile_count, threads, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % buffers.tiles_x;
        const int ty = static_cast<int>(tile) / buffers.tiles_x;
        const auto& list = buffers.tile_lists[tile];
        auto& grads = tile_grads[tile];
        grads.assign(list.size(), {});
        const int x_end = std::min(buffers.width, (tx + 1) * ts);
        const int y_end = std::min(buffers.height, (ty + 1) * ts);
        std::vector<int> composited;  // indices into `list`
        composited.reserve(list.size());
        for (int y = ty * ts; y < y_end; ++y) {
            for (int x = tx * ts; x < x_end; ++x) {
                const Vec2 p = pixel_center(x, y);
                const int want = buffers.n_contrib[static_cast<std::size_t>(y) * buffers.width + x];
                if (want == 0) continue;
                const Vec3 g(grad_image.at(y, x, 0), grad_image.at(y, x, 1), grad_image.at(y, x, 2));
                if (g.isZero(0.0)) continue;

                composited.clear();
                for (std::size_t li = 0; li < list.size() && static_cast<int>(composited.size()) < want; ++li) {
                    const auto& s = buffers.splats[static_cast<std::size_t>(list[li])];
                    if (std::abs(p.x() - s.mean2d.x()) > s.radius || std::abs(p.y() - s.mean2d.y()) > s.radius)
                        continue;
                    composited.push_back(static_cast<int>(li));
                }

                double T = buffers.final_transmittance.at(y, x);
                Vec3 behind = T * buffers.background;  // color contributed behind splat i
                for (std::size_t ci = composited.size(); ci-- > 0;) {
                    const int li = composited[ci];
                    const auto& s = buffers.splats[static_cast<std::size_t>(list[static_cast<std::size_t>(li)])];
                    const PixelSplatEval e = eval_splat_at(s, p);
                    const double one_minus = 1.0 - e.alpha;
                    const double T_i = T / one_minus;
                    auto& acc = grads[static_cast<std::size_t>(li)];

                    acc.color += g * (e.alpha * T_i);
                    const double g_alpha = g.dot(s.color * T_i - behind / one_minus);
                    if (!e.clamped) {
                        acc.opacity += g_alpha * e.gauss;
                        const double g_power = g_alpha * s.opacity * e.gauss;
                        const Vec2 cd = s.conic * e.d;
                        acc.mean2d += g_power * cd;
                        acc.cov2d += (0.5 * g_power) * (cd * cd.transpose());
                    }
                    behind += s.color * (e.alpha * T_i);
                    T = T_i;
                }
            }
        }
    });

    // Sequential reduction into per-splat accumulators.
    std::vector<SplatGradAccum> splat_grads(buffers.splats.size());
    for (std::size_t tile = 0; tile < tile_count; ++tile) {
        const auto& list = buffers.tile_lists[tile];
        for (std::size_t li = 0; li < list.size(); ++li) {
            const auto& g = tile_grads[tile][li];
            auto& acc = splat_grads[static_cast<std::size_t>(list[li])];
            acc.color += g.color;
            acc.opacity += g.opacity;
            acc.mean2d += g.mean2d;
            acc.cov2d += g.cov2d;
        }
    }

    // Chain splat-space gradients back to world-space Gaussian parameters.
    std::vector<GaussianGrad> out(gaussians.size());
    const Mat3 W = cam.rotation();
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        const int si = buffers.splat_of_input[i];
        if (si < 0) continue;
        const auto& sg = splat_grads[static_cast<std::size_t>(si)];
        auto& og = out[i];
        og.color = sg.color;
        og.opacity = sg.opacity;

        const Vec3 t = W * (gaussians[i].mean - cam.position);
        const Eigen::Matrix<double, 2, 3> J = projection_jacobian(cam, t);
        const Eigen::Matrix<double, 2, 3> M = J * W;
        og.covariance = M.transpose() * sg.cov2d * M;

        Vec3 g_t = J.transpose() * sg.mean2d;
        // cov2d also depends on t through J.
        const Mat3 V = W * gaussians[i].covariance * W.transpose();
        const double z = t.z(), zz = z * z, zzz = zz * z;
        Eigen::Matrix<double, 2, 3> dJ[3];
        dJ[0].setZero();
        dJ[0](0, 2) = -cam.fx / zz;
        dJ[1].setZero();
        dJ[1](1, 2) = -cam.fy / zz;
        dJ[2].setZero();
        dJ[2](0, 0) = -cam.fx / zz;
        dJ[2](0, 2) = 2.0 * cam.fx * t.x() / zzz;
        dJ[2](1, 1) = -cam.fy / zz;
        dJ[2](1, 2) = 2.0 * cam.fy * t.y() / zzz;
        for (int k = 0; k < 3; ++k) {
            const Mat2 P = dJ[k] * V * J.transpose();
            g_t[k] += (sg.cov2d.cwiseProduct(P + P.transpose())).sum();
        }
        og.mean = W.transpose() * g_t;
    }
    return out;
}

ImageRGB render_forward_f32(const Camera& cam, const std::vector<GaussianPrimitive>& gaussians,
                            const std::vector<SplatSource>& sources, const RenderConfig& cfg) {
    RenderBuffers buf = render(cam, gaussians, sources, cfg);

    struct SplatF {
        float mx, my, c00, c01, c11, opacity, r, g, b, radius;
    };
    std::vector<SplatF> fs(buf.splats.size());
    for (std::size_t i = 0; i < buf.splats.size(); ++i) {
        const auto& s = buf.splats[i];
        fs[i] = {static_cast<float>(s.mean2d.x()), static_cast<float>(s.mean2d.y()),
                 static_cast<float>(s.conic(0, 0)), static_cast<float>(s.conic(0, 1)),
                 static_cast<float>(s.conic(1, 1)), static_cast<float>(s.opacity),
                 static_cast<float>(s.color[0]), static_cast<float>(s.color[1]),
                 static_cast<float>(s.color[2]), static_cast<float>(s.radius)};
    }
    ImageRGB image(cam.height, cam.width);
    const float bg[3] = {static_cast<float>(cfg.background[0]), static_cast<float>(cfg.background[1]),
                         static_cast<float>(cfg.background[2])};
    const int ts = cfg.tile_size;
    parallel_for(buf.tile_lists.size(), cfg.threads, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % buf.tiles_x;
        const int ty = static_cast<int>(tile) / buf.tiles_x;
        const auto& list = buf.tile_lists[tile];
        const int x_end = std::min(cam.width, (tx + 1) * ts);
        const int y_end = std::min(cam.height, (ty + 1) * ts);
        for (int y = ty * ts; y < y_end; ++y)
            for (int x = tx * ts; x < x_end; ++x) {
                const float px = x + 0.5f, py = y + 0.5f;
                float col[3] = {0.f, 0.f, 0.f};
                float T = 1.f;
                for (const int si : list) {
                    const auto& s = fs[static_cast<std::size_t>(si)];
                    const float dx = px - s.mx, dy = py - s.my;
                    if (std::abs(dx) > s.radius || std::abs(dy) > s.radius) continue;
                    const float power = -0.5f * (s.c00 * dx * dx + 2.f * s.c01 * dx * dy + s.c11 * dy * dy);
                    float alpha = s.opacity * std::exp(power);
                    alpha = std::min(alpha, static_cast<float>(kAlphaClamp));
                    col[0] += s.r * alpha * T;
                    col[1] += s.g * alpha * T;
                    col[2] += s.b * alpha * T;
                    T *= 1.f - alpha;
                    if (T < static_cast<float>(kTransmittanceStop)) break;
                }
                for (int c = 0; c < 3; ++c) image.at(y, x, c) = col[c] + T * bg[c];
            }
    });
    return image;
}

}  // namespace mwgs
