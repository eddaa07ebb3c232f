#pragma once

#include "mwgs/common.hpp"
#include "mwgs/encoder.hpp"
#include "mwgs/metrics.hpp"
#include "mwgs/optim.hpp"
#include "mwgs/sampler.hpp"

#include <nlohmann/json.hpp>

namespace mwgs {

struct RunConfig {
    std::uint64_t seed = 1;
    int threads = 0;  // 0 -> MWGS_THREADS env, then 1
    std::string dataset;
    std::string output = "out";
    long steps = 2000;

    int k = 10;
    int n_v = 48;
    int n_r = 32;
    int n_g = 16;
    int pe_bands = 4;
    double voxel_size = 0.35;
    double init_opacity = 0.1;

    SamplerConfig sampler;

    std::string encoder_mode = "grid";
    int fmap_divisor = 2;

    LossWeights loss;

    int tile_size = 16;
    Vec3 background = Vec3::Zero();

    long checkpoint_every = 0;  // 0 -> final only
    std::string resume;
    int eval_reference_image = 0;
    int eval_test_every = 0;  // 0 -> all views train

    int bench_frames = 100;
    int bench_warmup = 10;
    bool bench_float32 = false;
    int bench_anchors = 64;
    std::string bench_scene;

    ScheduleSet schedules = default_schedules();

    // the validated JSON this config was built from
    std::string echo = "{}";

    EncoderMode encoder_mode_enum() const;
    void validate() const;
};

struct ConfigKeyDoc {
    std::string key;
    std::string default_value;
    std::string help;
};

// One row per recognized key; drives defaults, validation and --help.
const std::vector<ConfigKeyDoc>& config_schema();

nlohmann::json default_config_json();

// Parses + validates; rejects unknown keys anywhere in the tree.
RunConfig config_from_json(const nlohmann::json& root);

// Dotted-path override, value parsed as JSON with string fallback.
void apply_config_override(nlohmann::json& root, const std::string& key, const std::string& value);

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

// Human-readable key table for --help.
std::string config_help_text();

// json parse with line/column reporting on failure (InvalidConfig).
nlohmann::json parse_json_file(const std::string& path);

}  // namespace mwgs
