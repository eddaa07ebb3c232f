#pragma once

#include "mwgs/camera.hpp"
#include "mwgs/scene.hpp"
#include "mwgs/wavelet.hpp"

namespace mwgs {

struct SamplerConfig {
    int levels = 1;               // M, highest packet level
    int samples = 1;              // k_s per frustum cross-section
    double narrow_radius = 1.5;   // px on the feature map
    double broad_r_max = 32.0;    // px * world-unit
    double broad_r_min = 2.0;     // px
    std::string wavelet_family = "haar";
};

// sum_{m=0..levels} 4^m, the per-branch stage-weight logit count.
int stage_weight_count(int levels);

// Contiguous channel slices of width n_r / (2M+2), order preserving.
std::vector<Map3> split_feature_map(const Map3& fmap, int levels);

// chunks[2m] feeds the narrow branch of stage m, chunks[2m+1] the broad
// branch; stage m holds their level-m packet leaves (stage 0 = raw chunks).
struct FeaturePyramid {
    int levels = 0;
    int chunk_channels = 0;
    std::vector<Map3> chunks;
    std::vector<std::vector<Map3>> narrow_bands;
    std::vector<std::vector<Map3>> broad_bands;
};

FeaturePyramid build_pyramid(const Map3& fmap, int levels, const FilterPair& filters);

// Gradient mirror of the per-stage band maps.
struct PyramidGrad {
    std::vector<std::vector<Map3>> narrow_bands;
    std::vector<std::vector<Map3>> broad_bands;

    static PyramidGrad zeros_like(const FeaturePyramid& p);
};

// Collapses band gradients through the packet adjoints and re-concatenates
// chunk gradients into a feature-map gradient.
Map3 pyramid_backward(const PyramidGrad& grad, const FeaturePyramid& pyramid, const FilterPair& filters);

struct MapProjection {
    Vec2 coords = Vec2::Zero();  // level-scaled feature-map coordinates
    bool excluded = false;       // behind the near plane
};

// Pinhole projection into feature-map pixel units, scaled by 2^-level.
MapProjection project_to_map(const Camera& cam, const Vec3& x, int fmap_height, int fmap_width,
                             int level);

// R-dot = max(r_max / dist, r_min).
double broad_radius(double r_max, double r_min, double dist);

// Jittered bilinear taps averaged over k_s samples; `nc` rows are the
// learnable offsets, displacement bounded by `radius` per axis via tanh.
VecX sample_narrow(const Map3& band, const Vec2& p, const MatX& nc, double radius);

// Multiplicative radial jitter about the projection center: displacement
// (R/|p|) tanh(bc) .* p, bounded by R in the l2 sense.
VecX sample_broad(const Map3& band, const Vec2& p, const MatX& bc, double broad_r);

// softmax(logits) convex combination of per-band samples.
VecX fuse_stage(const std::vector<VecX>& samples, const VecX& logits, VecX* weights = nullptr);

// ---- full per-anchor refinement -------------------------------------------

struct AnchorSampleCtx {
    bool visible = false;
    Vec2 p0 = Vec2::Zero();  // level-0 feature-map coords
    Vec3 t = Vec3::Zero();   // camera-space anchor position
    double dist = 0.0;       // |x_v - x_c|
    double broad_r = 0.0;
    bool broad_clamped = false;
    std::vector<std::vector<VecX>> narrow_raw;  // [stage][band]
    std::vector<std::vector<VecX>> broad_raw;
    std::vector<VecX> narrow_w;  // softmax weights per stage
    std::vector<VecX> broad_w;
};

// f_r for one anchor (n_r entries); all-zero when the anchor is excluded.
VecX refine_anchor_features(const FeaturePyramid& pyramid, const Camera& cam, const Anchor& anchor,
                            const SamplerConfig& cfg, AnchorSampleCtx* ctx);

struct SamplerAnchorGrad {
    Vec3 position = Vec3::Zero();
    MatX nc, bc;
    VecX omega_narrow, omega_broad;
};

// Exact reverse of the sampling chain; band-texel gradients go to `pg`, the
// wavelet adjoint is applied later by pyramid_backward.
SamplerAnchorGrad refine_anchor_backward(const FeaturePyramid& pyramid, const Camera& cam,
                                         const Anchor& anchor, const SamplerConfig& cfg,
                                         const AnchorSampleCtx& ctx, const VecX& grad_fr,
                                         PyramidGrad& pg);

// Histogram of every narrow and broad sample position at feature-map
// resolution (level-m positions are mapped back to level 0).
Plane dump_attention(const FeaturePyramid& pyramid, const Camera& cam,
                     const std::vector<Anchor>& anchors, const SamplerConfig& cfg,
                     int fmap_height, int fmap_width);

}  // namespace mwgs
