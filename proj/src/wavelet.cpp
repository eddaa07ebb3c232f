#include "mwgs/wavelet.hpp"

namespace mwgs {

FilterPair FilterPair::haar() {
    const double r = 1.0 / std::sqrt(2.0);
    return {{r, r}, {r, -r}};
}

FilterPair FilterPair::db2() {
    const double s3 = std::sqrt(3.0);
    const double n = 4.0 * std::sqrt(2.0);
    const std::vector<double> h = {(1 + s3) / n, (3 + s3) / n, (3 - s3) / n, (1 - s3) / n};
    // Quadrature mirror: g[k] = (-1)^k h[taps-1-k].
    std::vector<double> g(h.size());
    for (std::size_t k = 0; k < h.size(); ++k)
        g[k] = (k % 2 == 0 ? 1.0 : -1.0) * h[h.size() - 1 - k];
    return {h, g};
}

FilterPair FilterPair::by_name(const std::string& name) {
    if (name == "haar") return haar();
    if (name == "db2") return db2();
    throw InvalidConfig("unknown wavelet family: " + name);
}

void FilterPair::validate() const {
    if (low.size() < 2 || low.size() != high.size() || low.size() % 2 != 0)
        throw InvalidParameter("filter pair: taps must come in equal even-length vectors");
    double ll = 0.0, hh = 0.0, lh = 0.0;
    for (std::size_t i = 0; i < low.size(); ++i) {
        ll += low[i] * low[i];
        hh += high[i] * high[i];
        lh += low[i] * high[i];
    }
    if (std::abs(ll - 1.0) > 1e-12 || std::abs(hh - 1.0) > 1e-12 || std::abs(lh) > 1e-12)
        throw InvalidParameter("filter pair is not orthonormal");
}

namespace {

// Decimating analysis along the leading axis of a [rows x cols] channel
// slice, periodic indexing. out has rows/2 rows.
void analyze_rows(const double* in, int rows, int cols, const std::vector<double>& taps, double* out) {
    const int half = rows / 2;
    const int nt = static_cast<int>(taps.size());
    for (int i = 0; i < half; ++i) {
        for (int x = 0; x < cols; ++x) {
            double acc = 0.0;
            for (int t = 0; t < nt; ++t) {
                const int r = (2 * i + t) % rows;
                acc += taps[static_cast<std::size_t>(t)] * in[static_cast<std::size_t>(r) * cols + x];
            }
            out[static_cast<std::size_t>(i) * cols + x] = acc;
        }
    }
}

// Transposed counterpart: scatters half-resolution rows back to full rows.
void synthesize_rows(const double* in, int rows, int cols, const std::vector<double>& taps, double* out) {
    const int half = rows / 2;
    const int nt = static_cast<int>(taps.size());
    for (int i = 0; i < half; ++i) {
        for (int x = 0; x < cols; ++x) {
            const double v = in[static_cast<std::size_t>(i) * cols + x];
            for (int t = 0; t < nt; ++t) {
                const int r = (2 * i + t) % rows;
                out[static_cast<std::size_t>(r) * cols + x] += taps[static_cast<std::size_t>(t)] * v;
            }
        }
    }
}

// Same pair of kernels along the second axis.
void analyze_cols(const double* in, int rows, int cols, const std::vector<double>& taps, double* out) {
    const int half = cols / 2;
    const int nt = static_cast<int>(taps.size());
    for (int y = 0; y < rows; ++y) {
        for (int j = 0; j < half; ++j) {
            double acc = 0.0;
            for (int t = 0; t < nt; ++t) {
                const int c = (2 * j + t) % cols;
                acc += taps[static_cast<std::size_t>(t)] * in[static_cast<std::size_t>(y) * cols + c];
            }
            out[static_cast<std::size_t>(y) * half + j] = acc;
        }
    }
}

void synthesize_cols(const double* in, int rows, int cols, const std::vector<double>& taps, double* out) {
    const int half = cols / 2;
    const int nt = static_cast<int>(taps.size());
    for (int y = 0; y < rows; ++y) {
        for (int j = 0; j < half; ++j) {
            const double v = in[static_cast<std::size_t>(y) * half + j];
            for (int t = 0; t < nt; ++t) {
                const int c = (2 * j + t) % cols;
                out[static_cast<std::size_t>(y) * cols + c] += taps[static_cast<std::size_t>(t)] * v;
            }
        }
    }
}

}  // namespace

SubbandSet dwt2(const Map3& f, const FilterPair& filters) {
    filters.validate();
    if (f.height % 2 != 0 || f.width % 2 != 0)
        throw InvalidShape("dwt2: height and width must be even");
    const int c = f.channels, h = f.height, w = f.width;
    SubbandSet s{Map3(c, h / 2, w / 2), Map3(c, h / 2, w / 2), Map3(c, h / 2, w / 2), Map3(c, h / 2, w / 2)};
    std::vector<double> lo(static_cast<std::size_t>(h / 2) * w), hi(static_cast<std::size_t>(h / 2) * w);
    for (int ch = 0; ch < c; ++ch) {
        const double* in = &f.v[static_cast<std::size_t>(ch) * h * w];
        analyze_rows(in, h, w, filters.low, lo.data());
        analyze_rows(in, h, w, filters.high, hi.data());
        const std::size_t out_off = static_cast<std::size_t>(ch) * (h / 2) * (w / 2);
        analyze_cols(lo.data(), h / 2, w, filters.low, &s.ll.v[out_off]);
        analyze_cols(hi.data(), h / 2, w, filters.low, &s.lh.v[out_off]);
        analyze_cols(lo.data(), h / 2, w, filters.high, &s.hl.v[out_off]);
        analyze_cols(hi.data(), h / 2, w, filters.high, &s.hh.v[out_off]);
    }
    return s;
}

Map3 idwt2(const SubbandSet& s, const FilterPair& filters) {
    filters.validate();
    if (!s.ll.same_shape(s.lh) || !s.ll.same_shape(s.hl) || !s.ll.same_shape(s.hh))
        throw InvalidShape("idwt2: sub-band shapes disagree");
    const int c = s.ll.channels, hh = s.ll.height, hw = s.ll.width;
    const int h = hh * 2, w = hw * 2;
    Map3 f(c, h, w);
    std::vector<double> lo(static_cast<std::size_t>(hh) * w), hi(static_cast<std::size_t>(hh) * w);
    for (int ch = 0; ch < c; ++ch) {
        const std::size_t in_off = static_cast<std::size_t>(ch) * hh * hw;
        std::fill(lo.begin(), lo.end(), 0.0);
        std::fill(hi.begin(), hi.end(), 0.0);
        synthesize_cols(&s.ll.v[in_off], hh, w, filters.low, lo.data());
        synthesize_cols(&s.hl.v[in_off], hh, w, filters.high, lo.data());
        synthesize_cols(&s.lh.v[in_off], hh, w, filters.low, hi.data());
        synthesize_cols(&s.hh.v[in_off], hh, w, filters.high, hi.data());
        double* out = &f.v[static_cast<std::size_t>(ch) * h * w];
        synthesize_rows(lo.data(), h, w, filters.low, out);
        synthesize_rows(hi.data(), h, w, filters.high, out);
    }
    return f;
}

Map3 dwt2_backward(const SubbandSet& grad, const FilterPair& filters) {
    // dwt2 is orthonormal-linear, so the adjoint is the synthesis transform.
    return idwt2(grad, filters);
}

std::vector<Map3> wavelet_packet(const Map3& f, int level, const FilterPair& filters) {
    if (level < 0) throw InvalidParameter("wavelet_packet: negative level");
    if (level == 0) return {f};
    const int div = 1 << level;
    if (f.height % div != 0 || f.width % div != 0)
        throw InvalidShape("wavelet_packet: dimensions not divisible by 2^level");
    SubbandSet s = dwt2(f, filters);
    std::vector<Map3> out;
    out.reserve(static_cast<std::size_t>(1) << (2 * level));
    for (const Map3* child : {&s.ll, &s.lh, &s.hl, &s.hh}) {
        auto sub = wavelet_packet(*child, level - 1, filters);
        for (auto& m : sub) out.push_back(std::move(m));
    }
    return out;
}

Map3 wavelet_packet_adjoint(const std::vector<Map3>& leaf_grads, int level, const FilterPair& filters) {
    const std::size_t expected = static_cast<std::size_t>(1) << (2 * level);
    if (leaf_grads.size() != expected) throw InvalidShape("wavelet_packet_adjoint: wrong leaf count");
    if (level == 0) return leaf_grads[0];
    const std::size_t quarter = expected / 4;
    std::vector<Map3> children;
    children.reserve(4);
    for (int q = 0; q < 4; ++q) {
        std::vector<Map3> part(leaf_grads.begin() + static_cast<std::ptrdiff_t>(q * quarter),
                               leaf_grads.begin() + static_cast<std::ptrdiff_t>((q + 1) * quarter));
        children.push_back(wavelet_packet_adjoint(part, level - 1, filters));
    }
    SubbandSet s{std::move(children[0]), std::move(children[1]), std::move(children[2]), std::move(children[3])};
    return dwt2_backward(s, filters);
}

}  // namespace mwgs
