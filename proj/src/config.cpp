#include "mwgs/config.hpp"

#include "mwgs/io.hpp"

#include <sstream>

namespace mwgs {

using nlohmann::json;

namespace {

struct SchemaRow {
    const char* key;
    const char* default_json;
    const char* help;
};

const SchemaRow kSchema[] = {
    {"seed", "1", "master RNG seed"},
    {"threads", "0", "worker threads; 0 defers to MWGS_THREADS, then 1"},
    {"dataset", "\"\"", "dataset directory (images/, cameras.json, manifest.json)"},
    {"output", "\"out\"", "output directory for checkpoints and logs"},
    {"steps", "2000", "total training steps"},
    {"model.k", "10", "gaussians per anchor"},
    {"model.n_v", "48", "intrinsic feature width"},
    {"model.n_r", "32", "refined feature width; must be divisible by 2M+2"},
    {"model.n_g", "16", "global feature width"},
    {"model.pe_bands", "4", "positional encoding bands"},
    {"model.voxel_size", "0.35", "anchor voxelization size, world units"},
    {"model.init_opacity", "0.1", "initial per-gaussian opacity"},
    {"sampler.levels", "1", "M, highest wavelet packet level"},
    {"sampler.samples", "1", "k_s, samples per frustum cross-section"},
    {"sampler.narrow_radius", "1.5", "narrow frustum radius, feature-map px"},
    {"sampler.broad_r_max", "32.0", "broad radius law numerator, px*unit"},
    {"sampler.broad_r_min", "2.0", "broad radius floor, px"},
    {"wavelet.family", "\"haar\"", "wavelet family: haar or db2"},
    {"encoder.mode", "\"grid\"", "appearance encoder: grid or conv"},
    {"encoder.fmap_divisor", "2", "feature map resolution = image / divisor"},
    {"loss.lambda_ssim", "0.2", "SSIM loss weight"},
    {"loss.lambda_l1", "0.8", "L1 loss weight"},
    {"loss.lambda_vm", "0.15", "visibility regularizer weight"},
    {"render.tile_size", "16", "rasterizer tile size, px"},
    {"render.background", "[0.0, 0.0, 0.0]", "background color"},
    {"train.checkpoint_every", "0", "checkpoint interval in steps; 0 = final only"},
    {"train.resume", "\"\"", "checkpoint to resume from"},
    {"eval.reference_image", "0", "bundle used for held-out views"},
    {"eval.test_every", "0", "every Nth image held out; 0 = none"},
    {"bench.frames", "100", "timed frames"},
    {"bench.warmup", "10", "warmup frames"},
    {"bench.float32", "false", "float32 compositing for the benchmark"},
    {"bench.anchors", "64", "procedural benchmark scene anchor count"},
    {"bench.scene", "\"\"", "optional scene JSON for the benchmark"},
    {"lr.means_offsets", "[1.6e-4, 1.6e-4]", "LR schedule [start, end]"},
    {"lr.log_scales", "[5e-3, 5e-3]", "LR schedule [start, end]"},
    {"lr.quaternions", "[1e-3, 1e-3]", "LR schedule [start, end]"},
    {"lr.opacity", "[5e-2, 5e-2]", "LR schedule [start, end]"},
    {"lr.intrinsic", "[7.5e-3, 7.5e-3]", "LR schedule [start, end]"},
    {"lr.jitter", "[1e-4, 1e-5]", "LR schedule [start, end]"},
    {"lr.encoder", "[1e-4, 1e-6]", "LR schedule [start, end]"},
    {"lr.hrfn", "[5e-4, 5e-5]", "LR schedule [start, end]"},
};

json* descend(json& root, const std::string& dotted, bool create) {
    json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            if (!create && !node->contains(part)) return nullptr;
            return &(*node)[part];
        }
        if (!create && !node->contains(part)) return nullptr;
        node = &(*node)[part];
        start = dot + 1;
    }
}

const json* find(const json& root, const std::string& dotted) {
    const json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) return nullptr;
        node = &node->at(part);
        if (dot == std::string::npos) return node;
        start = dot + 1;
    }
}

void collect_keys(const json& node, const std::string& prefix, std::vector<std::string>& out) {
    for (const auto& [k, v] : node.items()) {
        const std::string full = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object())
            collect_keys(v, full, out);
        else
            out.push_back(full);
    }
}

GroupSchedule schedule_from(const json& root, const std::string& key) {
    const json* v = find(root, key);
    if (!v || !v->is_array() || v->size() != 2)
        throw InvalidConfig(key + " must be a [start, end] pair");
    return {(*v)[0].get<double>(), (*v)[1].get<double>()};
}

}  // namespace

const std::vector<ConfigKeyDoc>& config_schema() {
    static const std::vector<ConfigKeyDoc> docs = [] {
        std::vector<ConfigKeyDoc> v;
        for (const auto& row : kSchema) v.push_back({row.key, row.default_json, row.help});
        return v;
    }();
    return docs;
}

json default_config_json() {
    json root = json::object();
    for (const auto& row : kSchema) *descend(root, row.key, true) = json::parse(row.default_json);
    return root;
}

EncoderMode RunConfig::encoder_mode_enum() const {
    if (encoder_mode == "grid") return EncoderMode::Grid;
    if (encoder_mode == "conv") return EncoderMode::Conv;
    throw InvalidConfig("encoder.mode must be grid or conv");
}

void RunConfig::validate() const {
    if (k < 1) throw InvalidConfig("model.k must be >= 1");
    if (n_v < 1 || n_r < 1 || n_g < 1) throw InvalidConfig("feature widths must be >= 1");
    if (pe_bands < 0) throw InvalidConfig("model.pe_bands must be >= 0");
    if (sampler.levels < 0) throw InvalidConfig("sampler.levels must be >= 0");
    if (sampler.samples < 1) throw InvalidConfig("sampler.samples must be >= 1");
    if (n_r % (2 * sampler.levels + 2) != 0)
        throw InvalidConfig("model.n_r must be divisible by 2M+2 (n_r=" + std::to_string(n_r) +
                            ", M=" + std::to_string(sampler.levels) + ")");
    if (!(sampler.narrow_radius > 0.0) || !(sampler.broad_r_max > 0.0) || !(sampler.broad_r_min > 0.0))
        throw InvalidConfig("sampler radii must be positive");
    FilterPair::by_name(sampler.wavelet_family).validate();
    (void)encoder_mode_enum();
    if (fmap_divisor < 1) throw InvalidConfig("encoder.fmap_divisor must be >= 1");
    if (loss.ssim < 0.0 || loss.l1 < 0.0 || loss.vm < 0.0)
        throw InvalidConfig("loss weights must be non-negative");
    if (tile_size < 1) throw InvalidConfig("render.tile_size must be >= 1");
    if (steps < 1) throw InvalidConfig("steps must be >= 1");
    if (!(voxel_size > 0.0)) throw InvalidConfig("model.voxel_size must be positive");
    if (!(init_opacity > 0.0) || !(init_opacity < 1.0))
        throw InvalidConfig("model.init_opacity must lie in (0,1)");
}

RunConfig config_from_json(const json& user) {
    // unknown-key check against the schema
    std::vector<std::string> keys;
    if (!user.is_object()) throw InvalidConfig("config root must be a JSON object");
    collect_keys(user, "", keys);
    for (const auto& k : keys) {
        bool known = false;
        for (const auto& row : kSchema)
            if (k == row.key) {
                known = true;
                break;
            }
        if (!known) throw InvalidConfig("unknown config key: " + k);
    }

    json root = default_config_json();
    root.merge_patch(user);

    RunConfig c;
    c.seed = find(root, "seed")->get<std::uint64_t>();
    c.threads = find(root, "threads")->get<int>();
    c.dataset = find(root, "dataset")->get<std::string>();
    c.output = find(root, "output")->get<std::string>();
    c.steps = find(root, "steps")->get<long>();
    c.k = find(root, "model.k")->get<int>();
    c.n_v = find(root, "model.n_v")->get<int>();
    c.n_r = find(root, "model.n_r")->get<int>();
    c.n_g = find(root, "model.n_g")->get<int>();
    c.pe_bands = find(root, "model.pe_bands")->get<int>();
    c.voxel_size = find(root, "model.voxel_size")->get<double>();
    c.init_opacity = find(root, "model.init_opacity")->get<double>();
    c.sampler.levels = find(root, "sampler.levels")->get<int>();
    c.sampler.samples = find(root, "sampler.samples")->get<int>();
    c.sampler.narrow_radius = find(root, "sampler.narrow_radius")->get<double>();
    c.sampler.broad_r_max = find(root, "sampler.broad_r_max")->get<double>();
    c.sampler.broad_r_min = find(root, "sampler.broad_r_min")->get<double>();
    c.sampler.wavelet_family = find(root, "wavelet.family")->get<std::string>();
    c.encoder_mode = find(root, "encoder.mode")->get<std::string>();
    c.fmap_divisor = find(root, "encoder.fmap_divisor")->get<int>();
    c.loss.ssim = find(root, "loss.lambda_ssim")->get<double>();
    c.loss.l1 = find(root, "loss.lambda_l1")->get<double>();
    c.loss.vm = find(root, "loss.lambda_vm")->get<double>();
    c.tile_size = find(root, "render.tile_size")->get<int>();
    {
        const json* bg = find(root, "render.background");
        if (!bg->is_array() || bg->size() != 3) throw InvalidConfig("render.background must have 3 entries");
        c.background = Vec3((*bg)[0].get<double>(), (*bg)[1].get<double>(), (*bg)[2].get<double>());
    }
    c.checkpoint_every = find(root, "train.checkpoint_every")->get<long>();
    c.resume = find(root, "train.resume")->get<std::string>();
    c.eval_reference_image = find(root, "eval.reference_image")->get<int>();
    c.eval_test_every = find(root, "eval.test_every")->get<int>();
    c.bench_frames = find(root, "bench.frames")->get<int>();
    c.bench_warmup = find(root, "bench.warmup")->get<int>();
    c.bench_float32 = find(root, "bench.float32")->get<bool>();
    c.bench_anchors = find(root, "bench.anchors")->get<int>();
    c.bench_scene = find(root, "bench.scene")->get<std::string>();

    c.schedules[static_cast<std::size_t>(ParamGroup::MeansOffsets)] = schedule_from(root, "lr.means_offsets");
    c.schedules[static_cast<std::size_t>(ParamGroup::LogScales)] = schedule_from(root, "lr.log_scales");
    c.schedules[static_cast<std::size_t>(ParamGroup::Quaternions)] = schedule_from(root, "lr.quaternions");
    c.schedules[static_cast<std::size_t>(ParamGroup::Opacity)] = schedule_from(root, "lr.opacity");
    c.schedules[static_cast<std::size_t>(ParamGroup::Intrinsic)] = schedule_from(root, "lr.intrinsic");
    c.schedules[static_cast<std::size_t>(ParamGroup::Jitter)] = schedule_from(root, "lr.jitter");
    c.schedules[static_cast<std::size_t>(ParamGroup::Encoder)] = schedule_from(root, "lr.encoder");
    c.schedules[static_cast<std::size_t>(ParamGroup::Hrfn)] = schedule_from(root, "lr.hrfn");

    c.echo = root.dump();
    c.validate();
    return c;
}

void apply_config_override(json& root, const std::string& key, const std::string& value) {
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;  // plain string
    }
    *descend(root, key, true) = parsed;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json root = path.empty() ? json::object() : parse_json_file(path);
    for (const auto& o : overrides) {
        const std::size_t eq = o.find('=');
        if (eq == std::string::npos) throw InvalidConfig("--set expects key=value, got: " + o);
        apply_config_override(root, o.substr(0, eq), o.substr(eq + 1));
    }
    return config_from_json(root);
}

std::string config_help_text() {
    std::ostringstream os;
    os << "Config keys (JSON file via --config, overridable with --set key=value):\n";
    for (const auto& row : kSchema) {
        os << "  " << row.key;
        for (std::size_t i = std::string(row.key).size(); i < 26; ++i) os << ' ';
        os << "default " << row.default_json;
        for (std::size_t i = std::string(row.default_json).size(); i < 18; ++i) os << ' ';
        os << row.help << "\n";
    }
    return os.str();
}

json parse_json_file(const std::string& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset -> line/column
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw InvalidConfig("malformed JSON in " + path + " at line " + std::to_string(line) +
                            ", column " + std::to_string(col) + ": " + e.what());
    }
}

}  // namespace mwgs
