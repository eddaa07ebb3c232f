#pragma once

#include "mwgs/grid.hpp"

namespace mwgs {

// 10 log10(1/MSE) over all pixels and channels, capped at 100 dB.
double psnr(const ImageRGB& a, const ImageRGB& b);

// Mean |vm .* a - vm .* b| over pixels and channels.
double masked_l1(const ImageRGB& a, const ImageRGB& b, const Plane& vm);

struct SsimGrads {
    ImageRGB d_a;
    ImageRGB d_b;
};

// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
// C2 = 0.03^2, computed per channel over the valid interior and averaged.
// When `grads` is given the analytic derivative w.r.t. both images is
// filled in.
double ssim(const ImageRGB& a, const ImageRGB& b, SsimGrads* grads = nullptr);

struct LossWeights {
    double ssim = 0.2;
    double l1 = 0.8;
    double vm = 0.15;
};

struct LossResult {
    double total = 0.0;
    double ssim_term = 0.0;
    double l1_term = 0.0;
    double vm_term = 0.0;
    double ssim_value = 0.0;
    ImageRGB grad_image;  // d total / d render
    Plane grad_vm;        // d total / d vm
};

// lambda_ssim (1 - SSIM(vm.*r, vm.*gt)) + lambda_1 L1(vm.*r, vm.*gt)
//   + lambda_vm mean((vm - 1)^2), with exact gradients.
LossResult total_loss(const ImageRGB& render, const ImageRGB& gt, const Plane& vm,
                      const LossWeights& w, bool with_grad = true);

}  // namespace mwgs
