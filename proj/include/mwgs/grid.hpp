#pragma once

#include "mwgs/common.hpp"

namespace mwgs {

// Channel-first dense map, layout [c][y][x].
struct Map3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> v;

    Map3() = default;
    Map3(int c, int h, int w) : channels(c), height(h), width(w), v(static_cast<std::size_t>(c) * h * w, 0.0) {}

    double& at(int c, int y, int x) { return v[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return v[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Map3& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

// Single-channel map, layout [y][x].
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(int h, int w) : height(h), width(w), v(static_cast<std::size_t>(h) * w, 0.0) {}

    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

// Interleaved RGB image, layout [y][x][3], values nominally in [0, 1].
struct ImageRGB {
    int height = 0;
    int width = 0;
    std::vector<double> v;

    ImageRGB() = default;
    ImageRGB(int h, int w) : height(h), width(w), v(static_cast<std::size_t>(h) * w * 3, 0.0) {}

    double& at(int y, int x, int c) { return v[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return v[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    bool same_shape(const ImageRGB& o) const { return height == o.height && width == o.width; }
    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

// Bilinear tap over the integer texel lattice, clamped to the edge. Texel
// (ix, iy) holds the value at continuous coordinate (ix, iy), so sampling an
// affine field at interior points is exact. When a coordinate gets clamped
// its positional derivative is zero.
struct BilinearTap {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double fx = 0.0, fy = 0.0;
    bool clamped_x = false, clamped_y = false;

    double w00() const { return (1.0 - fx) * (1.0 - fy); }
    double w01() const { return fx * (1.0 - fy); }
    double w10() const { return (1.0 - fx) * fy; }
    double w11() const { return fx * fy; }
};

inline BilinearTap make_bilinear_tap(int height, int width, double px, double py) {
    BilinearTap t;
    double cx = px, cy = py;
    if (cx < 0.0) { cx = 0.0; t.clamped_x = true; }
    if (cx > width - 1.0) { cx = width - 1.0; t.clamped_x = true; }
    if (cy < 0.0) { cy = 0.0; t.clamped_y = true; }
    if (cy > height - 1.0) { cy = height - 1.0; t.clamped_y = true; }
    if (width == 1) {
        t.x0 = t.x1 = 0;
        t.fx = 0.0;
        t.clamped_x = true;
    } else {
        t.x0 = std::min(static_cast<int>(std::floor(cx)), width - 2);
        t.x1 = t.x0 + 1;
        t.fx = cx - t.x0;
    }
    if (height == 1) {
        t.y0 = t.y1 = 0;
        t.fy = 0.0;
        t.clamped_y = true;
    } else {
        t.y0 = std::min(static_cast<int>(std::floor(cy)), height - 2);
        t.y1 = t.y0 + 1;
        t.fy = cy - t.y0;
    }
    return t;
}

// All channels at once; out must have map.channels entries.
inline void bilinear_sample(const Map3& map, const BilinearTap& t, double* out) {
    const double w00 = t.w00(), w01 = t.w01(), w10 = t.w10(), w11 = t.w11();
    for (int c = 0; c < map.channels; ++c) {
        out[c] = w00 * map.at(c, t.y0, t.x0) + w01 * map.at(c, t.y0, t.x1) +
                 w10 * map.at(c, t.y1, t.x0) + w11 * map.at(c, t.y1, t.x1);
    }
}

// Adjoint: scatters per-channel output gradients into grad_map and returns
// the gradient of the (pre-clamp) sample position.
inline Vec2 bilinear_backward(const Map3& map, const BilinearTap& t, const double* g_out, Map3& grad_map) {
    const double w00 = t.w00(), w01 = t.w01(), w10 = t.w10(), w11 = t.w11();
    double gx = 0.0, gy = 0.0;
    for (int c = 0; c < map.channels; ++c) {
        const double g = g_out[c];
        grad_map.at(c, t.y0, t.x0) += g * w00;
        grad_map.at(c, t.y0, t.x1) += g * w01;
        grad_map.at(c, t.y1, t.x0) += g * w10;
        grad_map.at(c, t.y1, t.x1) += g * w11;
        const double t00 = map.at(c, t.y0, t.x0), t01 = map.at(c, t.y0, t.x1);
        const double t10 = map.at(c, t.y1, t.x0), t11 = map.at(c, t.y1, t.x1);
        gx += g * ((t01 - t00) * (1.0 - t.fy) + (t11 - t10) * t.fy);
        gy += g * ((t10 - t00) * (1.0 - t.fx) + (t11 - t01) * t.fx);
    }
    return {t.clamped_x ? 0.0 : gx, t.clamped_y ? 0.0 : gy};
}

}  // namespace mwgs
