#pragma once

#include "mwgs/mlp.hpp"
#include "mwgs/optim.hpp"

namespace mwgs {

// sin/cos bands: [x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{L-1} pi x), cos(...)]
// per coordinate, giving 3 + 6 L entries.
VecX positional_encode(const Vec3& x, int bands);
Vec3 positional_encode_backward(const Vec3& x, int bands, const VecX& grad_out);

struct HrfnConfig {
    int k = 10;        // colors per anchor
    int n_v = 48;
    int n_r = 32;
    int n_g = 16;
    int pe_bands = 4;  // L_pe
};

struct HrfnCtx {
    Vec3 x_i = Vec3::Zero();
    Vec3 d_ic = Vec3::Zero();
    double dist = 0.0;
    VecX f_v, f_r, f_g;
    MlpCtx m1, m2, m3, m4;
    VecX colors;  // post-sigmoid, 3k
    double omega_r_mult = 1.0, omega_v_mult = 1.0;
};

struct HrfnGrads {
    MlpGrad m1, m2, m3, m4;
    double omega_r = 0.0;
    double omega_v = 0.0;
};

struct HrfnBackwardResult {
    Vec3 x_i = Vec3::Zero();
    VecX f_v, f_r, f_g;
};

// Four-MLP residual fusion producing k RGB colors per anchor:
//   Emb = M1(pe(x) ++ f_v ++ f_r ++ f_g) ++ w_r f_r
//   colors = sigmoid(M4(M3(M2(Emb ++ w_v f_v)) ++ d_ic))
class Hrfn {
public:
    static Hrfn make(const HrfnConfig& cfg, Rng& rng);

    const HrfnConfig& config() const { return cfg_; }

    // Returns k x 3 colors flattened row-major (gaussian-major). Scalar
    // multipliers support appearance tuning; both default to 1.
    VecX forward(const Vec3& x_i, const Vec3& cam_center, const VecX& f_v, const VecX& f_r,
                 const VecX& f_g, HrfnCtx* ctx, double omega_r_mult = 1.0,
                 double omega_v_mult = 1.0) const;

    // Accumulates parameter gradients internally; returns input gradients.
    HrfnBackwardResult backward(const HrfnCtx& ctx, const VecX& grad_colors);

    void collect_params(std::vector<ParamEntry>& out);
    void zero_grads();

    double omega_r = 1.0;
    double omega_v = 1.0;

private:
    HrfnConfig cfg_;
    Mlp m1_, m2_, m3_, m4_;
    HrfnGrads grads_;
};

}  // namespace mwgs
