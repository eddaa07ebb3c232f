#pragma once

#include "mwgs/scene.hpp"

#include <optional>
#include <span>

namespace mwgs {

inline constexpr double kCovDilation = 0.3;     // px^2 added to cov2d diagonal
inline constexpr double kAlphaClamp = 0.99;     // per-pixel alpha ceiling
inline constexpr double kTransmittanceStop = 1e-4;

// A projected Gaussian ready for compositing. `conic` caches cov2d^{-1};
// `radius` is the 3-sigma extent used both for tile binning and the
// per-pixel gate, which is what keeps any tiling bitwise identical.
struct Splat2D {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    Mat2 conic = Mat2::Identity();
    double depth = 0.0;
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    double radius = 0.0;
    int anchor_id = 0;
    int offset_id = 0;
    int input_index = 0;
};

struct RenderConfig {
    int tile_size = 16;
    Vec3 background = Vec3::Zero();
    int threads = 1;
};

struct RenderBuffers {
    int width = 0;
    int height = 0;
    int tile_size = 16;
    Vec3 background = Vec3::Zero();
    ImageRGB image;
    Plane depth;                  // alpha-weighted depth
    Plane final_transmittance;    // record kept for the backward pass
    std::vector<int> n_contrib;   // per pixel: splats composited before stopping
    std::vector<Splat2D> splats;  // depth-sorted, ties by (anchor, offset)
    std::vector<int> splat_of_input;  // input index -> sorted splat index, -1 if culled
    std::vector<std::vector<int>> tile_lists;
    int tiles_x = 0;
    int tiles_y = 0;
};

// EWA projection: cov2d = J W Sigma W^T J^T + dilation I. Returns nullopt
// when the Gaussian is behind the near plane or its 3-sigma box misses the
// image.
std::optional<Splat2D> project_gaussian(const Camera& cam, const GaussianPrimitive& g,
                                        int width, int height, double dilation = kCovDilation);

// Front-to-back compositing at a pixel center; splats must be depth-sorted.
// Identical arithmetic to the tiled path.
Vec3 composite_pixel(std::span<const Splat2D> sorted, const Vec2& p, const Vec3& background);

// Per-Gaussian sources let depth ties break deterministically.
struct SplatSource {
    int anchor_id = 0;
    int offset_id = 0;
};

RenderBuffers render(const Camera& cam, const std::vector<GaussianPrimitive>& gaussians,
                     const std::vector<SplatSource>& sources, const RenderConfig& cfg);

// Gradients w.r.t. every input Gaussian's {mean, covariance, opacity,
// color}; culled Gaussians get zeros. Callers chain covariance/mean grads
// onto anchor parameters via scene-core.
std::vector<GaussianGrad> render_backward(const Camera& cam,
                                          const std::vector<GaussianPrimitive>& gaussians,
                                          const RenderBuffers& buffers,
                                          const ImageRGB& grad_image, int threads);

// float32 compositing path used by the benchmark command only.
ImageRGB render_forward_f32(const Camera& cam, const std::vector<GaussianPrimitive>& gaussians,
                            const std::vector<SplatSource>& sources, const RenderConfig& cfg);

}  // namespace mwgs
