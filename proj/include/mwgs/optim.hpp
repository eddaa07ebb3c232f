#pragma once

#include "mwgs/common.hpp"

#include <array>

namespace mwgs {

enum class ParamGroup : int {
    MeansOffsets = 0,
    LogScales,
    Quaternions,
    Opacity,
    Intrinsic,
    Jitter,
    Encoder,
    Hrfn,
    kCount
};

const char* param_group_name(ParamGroup g);

// Flat view of one optimizable tensor; grad has the same layout as value.
struct ParamEntry {
    std::string name;
    ParamGroup group = ParamGroup::Hrfn;
    double* value = nullptr;
    double* grad = nullptr;
    std::size_t size = 0;
};

struct GroupSchedule {
    double lr_start = 0.0;
    double lr_end = 0.0;
};

// Exponential interpolation lr_start * (lr_end / lr_start)^(step/total);
// steps past `total` clamp to lr_end.
double lr_at(const GroupSchedule& s, long step, long total);

using ScheduleSet = std::array<GroupSchedule, static_cast<std::size_t>(ParamGroup::kCount)>;
ScheduleSet default_schedules();

struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    void init(const std::vector<ParamEntry>& entries);

    // One bias-corrected update over every entry; throws TrainingDivergence
    // on non-finite gradients, naming the offending entry.
    void step(const std::vector<ParamEntry>& entries, const std::array<double, static_cast<std::size_t>(ParamGroup::kCount)>& lr);
};

}  // namespace mwgs
