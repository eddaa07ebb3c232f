#pragma once

#include "mwgs/camera.hpp"

#include <string>
#include <vector>

namespace mwgs {

struct GaussianPrimitive {
    Vec3 mean = Vec3::Zero();
    Mat3 covariance = Mat3::Identity();
    double opacity = 0.5;
    Vec3 color = Vec3::Zero();
};

// Voxel-centered anchor owning k Gaussians through learnable offsets, plus
// the per-anchor appearance state: intrinsic feature f_v and the sampler's
// jitter offsets / frustum weights.
struct Anchor {
    Vec3 position = Vec3::Zero();      // x_v
    Vec3 log_scaling = Vec3::Zero();   // log l_v
    MatX offsets;                      // k x 3
    VecX opacity_logits;               // k
    MatX rotations;                    // k x 4, (w, x, y, z), renormalized on use
    MatX log_scales;                   // k x 3
    VecX f_v;                          // n_v
    MatX nc;                           // k_s x 2, narrow jitter
    MatX bc;                           // k_s x 2, broad jitter
    VecX omega_narrow;                 // sum_{m<=M} 4^m stage-weight logits
    VecX omega_broad;

    int gaussian_count() const { return static_cast<int>(offsets.rows()); }
    void validate() const;
};

// Gradients mirroring the Anchor geometry-side fields.
struct AnchorGeomGrad {
    Vec3 position = Vec3::Zero();
    Vec3 log_scaling = Vec3::Zero();
    MatX offsets;
    VecX opacity_logits;
    MatX rotations;
    MatX log_scales;

    static AnchorGeomGrad zeros_like(const Anchor& a);
};

// Per-Gaussian upstream gradients produced by the rasterizer backward pass.
struct GaussianGrad {
    Vec3 mean = Vec3::Zero();
    Mat3 covariance = Mat3::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
};

// Sigma = R S S^T R^T with R from q and S = diag(s); eigenvalues are s_i^2.
Mat3 build_covariance(const Vec4& q, const Vec3& s);

struct CovarianceGrad {
    Vec4 q = Vec4::Zero();
    Vec3 s = Vec3::Zero();
};
CovarianceGrad build_covariance_backward(const Vec4& q, const Vec3& s, const Mat3& grad_sigma);

// Colors are left at zero; they come from the fusion network.
std::vector<GaussianPrimitive> expand_anchor(const Anchor& a);

// Chains per-Gaussian gradients back onto the anchor's geometry parameters
// (accumulates into `out`).
void expand_anchor_backward(const Anchor& a, const std::vector<GaussianGrad>& grads, AnchorGeomGrad& out);

double eval_gaussian(const GaussianPrimitive& g, const Vec3& x);

// Scene file: cameras + anchors + a config echo, JSON with lossless doubles.
struct SceneFile {
    std::vector<Camera> cameras;
    std::vector<Anchor> anchors;
    std::string config_json = "{}";
};

void save_scene(const std::string& path, const SceneFile& scene);
SceneFile load_scene(const std::string& path);

}  // namespace mwgs
