#pragma once

#include "mwgs/grid.hpp"
#include "mwgs/mlp.hpp"
#include "mwgs/optim.hpp"

namespace mwgs {

// Per reference image: global feature, refined-feature source map, and the
// visibility map used to down-weight transients in the loss.
struct AppearanceBundle {
    VecX f_g;    // n_g
    Map3 fmap;   // n_r x H_F x W_F
    Plane vm;    // H x W, strictly inside (0, 1)
};

enum class EncoderMode { Grid, Conv };

struct EncoderConfig {
    EncoderMode mode = EncoderMode::Grid;
    int image_height = 64;
    int image_width = 64;
    int fmap_height = 32;
    int fmap_width = 32;
    int n_r = 32;
    int n_g = 16;
};

struct Conv2d {
    int in_ch = 0, out_ch = 0, stride = 1;
    std::vector<double> w;  // [oc][ic][3][3]
    VecX b;

    static Conv2d make(int in_ch, int out_ch, int stride, Rng& rng);
    Map3 forward(const Map3& x) const;
};

struct Conv2dGrad {
    std::vector<double> w;
    VecX b;
    static Conv2dGrad zeros_like(const Conv2d& c) { return {std::vector<double>(c.w.size(), 0.0), VecX::Zero(c.b.size())}; }
};

// Returns grad w.r.t. the input; accumulates parameter grads.
Map3 conv2d_backward(const Conv2d& c, const Map3& x, const Map3& g_out, Conv2dGrad& g);

Map3 upsample2x(const Map3& x);
Map3 upsample2x_backward(const Map3& g_out);

// Spatial mean per channel followed by a two-layer MLP; shared by both
// encoder modes.
VecX global_feature(const Map3& f_enc, const Mlp& mlp_g, MlpCtx* ctx, VecX* pooled);

struct EncodeCtx {
    int image_id = -1;
    MlpCtx mlp_g;
    VecX pooled;
    Map3 fmap;  // retained copy handed to the sampler
    Plane vm;
    // conv-mode intermediates: the input fed to each conv, in eval order,
    // plus the shared encoder output.
    std::vector<Map3> conv_inputs;
    Map3 f_enc;
};

class AppearanceEncoder {
public:
    static AppearanceEncoder make(const EncoderConfig& cfg, int image_count, Rng& rng);

    const EncoderConfig& config() const { return cfg_; }
    int image_count() const { return image_count_; }

    // Grid mode ignores `image`; conv mode requires it. image_id == -1 is an
    // unregistered external reference and is valid only in conv mode.
    AppearanceBundle encode(int image_id, const ImageRGB* image, EncodeCtx* ctx) const;

    void encode_backward(const EncodeCtx& ctx, const VecX& g_fg, const Map3& g_fmap, const Plane& g_vm);

    void collect_params(std::vector<ParamEntry>& out);
    void zero_grads();

    // checkpoint plumbing
    std::vector<ParamEntry> param_entries() { std::vector<ParamEntry> v; collect_params(v); return v; }

private:
    EncoderConfig cfg_;
    int image_count_ = 0;

    // grid mode
    std::vector<Map3> grid_fmap_, grid_fmap_grad_;
    std::vector<Plane> grid_vm_logits_, grid_vm_logits_grad_;

    // conv mode
    std::vector<Conv2d> enc_;        // 3 stride-2 stages
    std::vector<Conv2d> dec_fmap_;   // 2 upsample stages
    std::vector<Conv2d> dec_vm_;     // 3 upsample stages
    std::vector<Conv2dGrad> enc_grad_, dec_fmap_grad_, dec_vm_grad_;

    Mlp mlp_g_;
    MlpGrad mlp_g_grad_;
};

}  // namespace mwgs
