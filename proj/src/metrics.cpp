#include "mwgs/metrics.hpp"

namespace mwgs {

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& window1d() {
    static const std::vector<double> w = [] {
        std::vector<double> v(kWin);
        const double sigma = 1.5;
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - (kWin - 1) / 2.0;
            v[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
            sum += v[static_cast<std::size_t>(i)];
        }
        for (auto& x : v) x /= sum;
        return v;
    }();
    return w;
}

// Valid-mode separable correlation of an H x W field with the window.
void corr_valid(const std::vector<double>& f, int h, int w, std::vector<double>& out,
                std::vector<double>& scratch) {
    const auto& g = window1d();
    const int vw = w - kWin + 1;
    const int vh = h - kWin + 1;
    scratch.assign(static_cast<std::size_t>(h) * vw, 0.0);
    for (int y = 0; y < h; ++y)
        for (int ox = 0; ox < vw; ++ox) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += g[static_cast<std::size_t>(k)] * f[static_cast<std::size_t>(y) * w + ox + k];
            scratch[static_cast<std::size_t>(y) * vw + ox] = acc;
        }
    out.assign(static_cast<std::size_t>(vh) * vw, 0.0);
    for (int oy = 0; oy < vh; ++oy)
        for (int ox = 0; ox < vw; ++ox) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += g[static_cast<std::size_t>(k)] * scratch[static_cast<std::size_t>(oy + k) * vw + ox];
            out[static_cast<std::size_t>(oy) * vw + ox] = acc;
        }
}

// Adjoint of corr_valid: scatters a valid-grid gradient back to full size.
void corr_valid_adjoint(const std::vector<double>& gin, int h, int w, std::vector<double>& out,
                        std::vector<double>& scratch) {
    const auto& g = window1d();
    const int vw = w - kWin + 1;
    const int vh = h - kWin + 1;
    scratch.assign(static_cast<std::size_t>(h) * vw, 0.0);
    for (int oy = 0; oy < vh; ++oy)
        for (int ox = 0; ox < vw; ++ox) {
            const double v = gin[static_cast<std::size_t>(oy) * vw + ox];
            if (v == 0.0) continue;
            for (int k = 0; k < kWin; ++k) scratch[static_cast<std::size_t>(oy + k) * vw + ox] += g[static_cast<std::size_t>(k)] * v;
        }
    out.assign(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int ox = 0; ox < vw; ++ox) {
            const double v = scratch[static_cast<std::size_t>(y) * vw + ox];
            if (v == 0.0) continue;
            for (int k = 0; k < kWin; ++k) out[static_cast<std::size_t>(y) * w + ox + k] += g[static_cast<std::size_t>(k)] * v;
        }
}

void extract_channel(const ImageRGB& im, int c, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(im.height) * im.width);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) out[static_cast<std::size_t>(y) * im.width + x] = im.at(y, x, c);
}

}  // namespace

double psnr(const ImageRGB& a, const ImageRGB& b) {
    if (!a.same_shape(b)) throw InvalidShape("psnr: image shapes disagree");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double d = a.v[i] - b.v[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.v.size());
    if (mse == 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double masked_l1(const ImageRGB& a, const ImageRGB& b, const Plane& vm) {
    if (!a.same_shape(b)) throw InvalidShape("masked_l1: image shapes disagree");
    if (vm.height != a.height || vm.width != a.width) throw InvalidShape("masked_l1: mask shape disagrees");
    double acc = 0.0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            const double m = vm.at(y, x);
            for (int c = 0; c < 3; ++c) acc += std::abs(m * a.at(y, x, c) - m * b.at(y, x, c));
        }
    return acc / static_cast<double>(a.v.size());
}

double ssim(const ImageRGB& a, const ImageRGB& b, SsimGrads* grads) {
    if (!a.same_shape(b)) throw InvalidShape("ssim: image shapes disagree");
    if (a.height < kWin || a.width < kWin) throw InvalidShape("ssim: image smaller than window");
    const int h = a.height, w = a.width;
    const int vh = h - kWin + 1, vw = w - kWin + 1;
    const std::size_t n_valid = static_cast<std::size_t>(vh) * vw;
    const double upstream = 1.0 / (static_cast<double>(n_valid) * 3.0);

    if (grads) {
        grads->d_a = ImageRGB(h, w);
        grads->d_b = ImageRGB(h, w);
    }

    std::vector<double> fa, fb, faa, fbb, fab;
    std::vector<double> u1, u2, v11, v22, v12, scratch;
    std::vector<double> g_u1, g_u2, g_v11, g_v22, g_v12, s1, s2, s3;

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        extract_channel(a, c, fa);
        extract_channel(b, c, fb);
        const std::size_t n = fa.size();
        faa.resize(n);
        fbb.resize(n);
        fab.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            faa[i] = fa[i] * fa[i];
            fbb[i] = fb[i] * fb[i];
            fab[i] = fa[i] * fb[i];
        }
        corr_valid(fa, h, w, u1, scratch);
        corr_valid(fb, h, w, u2, scratch);
        corr_valid(faa, h, w, v11, scratch);
        corr_valid(fbb, h, w, v22, scratch);
        corr_valid(fab, h, w, v12, scratch);

        if (grads) {
            g_u1.assign(n_valid, 0.0);
            g_u2.assign(n_valid, 0.0);
            g_v11.assign(n_valid, 0.0);
            g_v22.assign(n_valid, 0.0);
            g_v12.assign(n_valid, 0.0);
        }

        for (std::size_t i = 0; i < n_valid; ++i) {
            const double m1 = u1[i], m2 = u2[i];
            const double s11 = v11[i] - m1 * m1;
            const double s22 = v22[i] - m2 * m2;
            const double s12 = v12[i] - m1 * m2;
            const double A = 2.0 * m1 * m2 + kC1;
            const double B = 2.0 * s12 + kC2;
            const double C = m1 * m1 + m2 * m2 + kC1;
            const double D = s11 + s22 + kC2;
            total += (A * B) / (C * D);
            if (grads) {
                const double inv_cd = 1.0 / (C * D);
                const double gA = B * inv_cd;
                const double gB = A * inv_cd;
                const double gC = -A * B * inv_cd / C;
                const double gD = -A * B * inv_cd / D;
                g_u1[i] = upstream * (gA * 2.0 * m2 + gB * (-2.0 * m2) + gC * 2.0 * m1 + gD * (-2.0 * m1));
                g_u2[i] = upstream * (gA * 2.0 * m1 + gB * (-2.0 * m1) + gC * 2.0 * m2 + gD * (-2.0 * m2));
                g_v11[i] = upstream * gD;
                g_v22[i] = upstream * gD;
                g_v12[i] = upstream * gB * 2.0;
            }
        }

        if (grads) {
            corr_valid_adjoint(g_u1, h, w, s1, scratch);
            corr_valid_adjoint(g_v11, h, w, s2, scratch);
            corr_valid_adjoint(g_v12, h, w, s3, scratch);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    grads->d_a.at(y, x, c) = s1[i] + 2.0 * fa[i] * s2[i] + fb[i] * s3[i];
                }
            corr_valid_adjoint(g_u2, h, w, s1, scratch);
            corr_valid_adjoint(g_v22, h, w, s2, scratch);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    grads->d_b.at(y, x, c) = s1[i] + 2.0 * fb[i] * s2[i] + fa[i] * s3[i];
                }
        }
    }
    return total * upstream;
}

LossResult total_loss(const ImageRGB& render, const ImageRGB& gt, const Plane& vm,
                      const LossWeights& w, bool with_grad) {
    if (!render.same_shape(gt)) throw InvalidShape("total_loss: image shapes disagree");
    if (vm.height != render.height || vm.width != render.width)
        throw InvalidShape("total_loss: mask shape disagrees");
    const int h = render.height, wd = render.width;

    ImageRGB mr(h, wd), mg(h, wd);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wd; ++x) {
            const double m = vm.at(y, x);
            for (int c = 0; c < 3; ++c) {
                mr.at(y, x, c) = m * render.at(y, x, c);
                mg.at(y, x, c) = m * gt.at(y, x, c);
            }
        }

    LossResult out;
    SsimGrads sg;
    out.ssim_value = ssim(mr, mg, with_grad ? &sg : nullptr);
    out.ssim_term = w.ssim * (1.0 - out.ssim_value);
    out.l1_term = w.l1 * masked_l1(render, gt, vm);

    const double n_pix = static_cast<double>(h) * wd;
    const double n_all = n_pix * 3.0;
    double vm_acc = 0.0;
    for (const double m : vm.v) vm_acc += (m - 1.0) * (m - 1.0);
    out.vm_term = w.vm * vm_acc / n_pix;
    out.total = out.ssim_term + out.l1_term + out.vm_term;

    if (with_grad) {
        out.grad_image = ImageRGB(h, wd);
        out.grad_vm = Plane(h, wd);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < wd; ++x) {
                const double m = vm.at(y, x);
                double gm = w.vm * 2.0 * (m - 1.0) / n_pix;
                for (int c = 0; c < 3; ++c) {
                    const double diff = mr.at(y, x, c) - mg.at(y, x, c);
                    const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                    const double g_mr = -w.ssim * sg.d_a.at(y, x, c) + w.l1 * sgn / n_all;
                    const double g_mg = -w.ssim * sg.d_b.at(y, x, c) - w.l1 * sgn / n_all;
                    out.grad_image.at(y, x, c) = g_mr * m;
                    gm += g_mr * render.at(y, x, c) + g_mg * gt.at(y, x, c);
                }
                out.grad_vm.at(y, x) = gm;
            }
    }
    return out;
}

}  // namespace mwgs
