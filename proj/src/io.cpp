#include "mwgs/io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mwgs {

namespace {

std::uint8_t quantize8(double c) {
    const double x = std::clamp(c, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(255.0 * x));
}

}  // namespace

void write_ppm(const std::string& path, const ImageRGB& image) {
    if (image.width <= 0 || image.height <= 0) throw InvalidParameter("ppm: empty image");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width) * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) row[static_cast<std::size_t>(x) * 3 + c] = quantize8(image.at(y, x, c));
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("write failed: " + path);
}

ImageRGB read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    auto next_token = [&f, &path]() {
        std::string tok;
        for (;;) {
            int ch = f.get();
            if (ch == EOF) throw IoError("truncated ppm header: " + path);
            if (ch == '#') {
                while (ch != EOF && ch != '\n') ch = f.get();
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(ch));
        }
    };
    if (next_token() != "P6") throw IoError("not a P6 ppm: " + path);
    const int width = std::stoi(next_token());
    const int height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (width <= 0 || height <= 0 || maxval != 255) throw IoError("unsupported ppm: " + path);
    ImageRGB image(height, width);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(width) * 3);
    for (int y = 0; y < height; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!f) throw IoError("truncated ppm data: " + path);
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c) image.at(y, x, c) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0;
    }
    return image;
}

void write_ppm_gray(const std::string& path, const Plane& plane) {
    ImageRGB image(plane.height, plane.width);
    for (int y = 0; y < plane.height; ++y)
        for (int x = 0; x < plane.width; ++x)
            for (int c = 0; c < 3; ++c) image.at(y, x, c) = plane.at(y, x);
    write_ppm(path, image);
}

void dump_f64(const std::string& path, const double* data, std::size_t count,
              const std::vector<int>& shape) {
    static_assert(std::endian::native == std::endian::little, "raw dumps are little-endian");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    if (!f) throw IoError("write failed: " + path);
    nlohmann::json side;
    side["dtype"] = "float64";
    side["order"] = "row-major";
    side["shape"] = shape;
    write_text_file(path + ".json", side.dump(2) + "\n");
}

std::vector<double> load_f64(const std::string& path, std::vector<int>* shape) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open: " + path);
    const auto bytes = static_cast<std::size_t>(f.tellg());
    if (bytes % sizeof(double) != 0) throw IoError("raw f64 file has odd size: " + path);
    f.seekg(0);
    std::vector<double> out(bytes / sizeof(double));
    f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw IoError("read failed: " + path);
    if (shape) {
        const auto side = nlohmann::json::parse(read_text_file(path + ".json"));
        *shape = side.at("shape").get<std::vector<int>>();
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << text;
    if (!f) throw IoError("write failed: " + path);
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (f) {
        f.read(buf, sizeof(buf));
        const auto n = f.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<std::uint8_t>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hex_u64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return std::string(buf);
}

}  // namespace mwgs
