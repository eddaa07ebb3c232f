#include "mwgs/optim.hpp"

namespace mwgs {

const char* param_group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::MeansOffsets: return "means_offsets";
        case ParamGroup::LogScales: return "log_scales";
        case ParamGroup::Quaternions: return "quaternions";
        case ParamGroup::Opacity: return "opacity";
        case ParamGroup::Intrinsic: return "intrinsic";
        case ParamGroup::Jitter: return "jitter";
        case ParamGroup::Encoder: return "encoder";
        case ParamGroup::Hrfn: return "hrfn";
        default: return "unknown";
    }
}

double lr_at(const GroupSchedule& s, long step, long total) {
    if (total <= 0 || step >= total) return s.lr_end;
    if (step < 0) throw InvalidParameter("lr_at: negative step");
    const double t = static_cast<double>(step) / static_cast<double>(total);
    return s.lr_start * std::pow(s.lr_end / s.lr_start, t);
}

ScheduleSet default_schedules() {
    ScheduleSet s;
    s[static_cast<std::size_t>(ParamGroup::MeansOffsets)] = {1.6e-4, 1.6e-4};
    s[static_cast<std::size_t>(ParamGroup::LogScales)] = {5e-3, 5e-3};
    s[static_cast<std::size_t>(ParamGroup::Quaternions)] = {1e-3, 1e-3};
    s[static_cast<std::size_t>(ParamGroup::Opacity)] = {5e-2, 5e-2};
    s[static_cast<std::size_t>(ParamGroup::Intrinsic)] = {7.5e-3, 7.5e-3};
    s[static_cast<std::size_t>(ParamGroup::Jitter)] = {1e-4, 1e-5};
    s[static_cast<std::size_t>(ParamGroup::Encoder)] = {1e-4, 1e-6};
    s[static_cast<std::size_t>(ParamGroup::Hrfn)] = {5e-4, 5e-5};
    return s;
}

void Adam::init(const std::vector<ParamEntry>& entries) {
    step_count = 0;
    m.clear();
    v.clear();
    m.reserve(entries.size());
    v.reserve(entries.size());
    for (const auto& e : entries) {
        m.emplace_back(e.size, 0.0);
        v.emplace_back(e.size, 0.0);
    }
}

void Adam::step(const std::vector<ParamEntry>& entries,
                const std::array<double, static_cast<std::size_t>(ParamGroup::kCount)>& lr) {
    if (entries.size() != m.size()) throw InvalidShape("adam: entry count changed since init");
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t e = 0; e < entries.size(); ++e) {
        const auto& entry = entries[e];
        if (m[e].size() != entry.size) throw InvalidShape("adam: entry size changed since init");
        const double rate = lr[static_cast<std::size_t>(entry.group)];
        for (std::size_t i = 0; i < entry.size; ++i) {
            const double g = entry.grad[i];
            if (!std::isfinite(g))
                throw TrainingDivergence("non-finite gradient in " + entry.name);
            m[e][i] = beta1 * m[e][i] + (1.0 - beta1) * g;
            v[e][i] = beta2 * v[e][i] + (1.0 - beta2) * g * g;
            const double mhat = m[e][i] / bc1;
            const double vhat = v[e][i] / bc2;
            entry.value[i] -= rate * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace mwgs
