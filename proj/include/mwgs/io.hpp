#pragma once

#include "mwgs/grid.hpp"

#include <cstdint>
#include <string>

namespace mwgs {

// Binary PPM (P6, maxval 255). Channel values are quantized with
// round(255 * clamp(c, 0, 1)) on write and mapped back by /255 on read.
void write_ppm(const std::string& path, const ImageRGB& image);
ImageRGB read_ppm(const std::string& path);

// Grayscale convenience: replicates the plane into RGB before writing.
void write_ppm_gray(const std::string& path, const Plane& plane);

// Raw little-endian float64 dump with a JSON shape sidecar at <path>.json.
void dump_f64(const std::string& path, const double* data, std::size_t count,
              const std::vector<int>& shape);
std::vector<double> load_f64(const std::string& path, std::vector<int>* shape = nullptr);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// FNV-1a over file bytes; used for dataset manifests.
std::uint64_t fnv1a_file(const std::string& path);
std::string hex_u64(std::uint64_t value);

}  // namespace mwgs
