#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mwgs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

// Error taxonomy shared by every module. The CLI maps these onto exit codes.
struct InvalidParameter : std::runtime_error {
    explicit InvalidParameter(const std::string& m) : std::runtime_error("invalid-parameter: " + m) {}
};
struct InvalidShape : std::runtime_error {
    explicit InvalidShape(const std::string& m) : std::runtime_error("invalid-shape: " + m) {}
};
struct InvalidConfig : std::runtime_error {
    explicit InvalidConfig(const std::string& m) : std::runtime_error("invalid-config: " + m) {}
};
struct MissingEntry : std::runtime_error {
    explicit MissingEntry(const std::string& m) : std::runtime_error("missing-entry: " + m) {}
};
struct BehindCamera : std::runtime_error {
    explicit BehindCamera(const std::string& m) : std::runtime_error("behind-camera: " + m) {}
};
struct NumericalDegeneracy : std::runtime_error {
    explicit NumericalDegeneracy(const std::string& m) : std::runtime_error("numerical-degeneracy: " + m) {}
};
struct TrainingDivergence : std::runtime_error {
    explicit TrainingDivergence(const std::string& m) : std::runtime_error("training-divergence: " + m) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error("io-error: " + m) {}
};

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double inverse_sigmoid(double y) { return std::log(y / (1.0 - y)); }

// Counter-based generator (xoshiro256++ seeded via splitmix64). We avoid the
// std distributions so that seeded runs are reproducible across standard
// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Inclusive on both ends.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Independent stream derived from this one; used to give each subsystem
    // its own seed without coupling consumption order.
    Rng fork(std::uint64_t stream) {
        std::uint64_t x = next_u64() ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        return Rng(x);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Runs body(i) for i in [0, count). Tasks must write only to task-indexed
// slots; reductions over task results happen in index order on the caller
// side, which keeps every result independent of the thread count.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

// --threads resolution: explicit value wins, then MWGS_THREADS, then 1.
int resolve_threads(int requested);

}  // namespace mwgs
