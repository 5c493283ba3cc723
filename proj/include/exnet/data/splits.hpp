#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exnet/data/clips.hpp"

namespace exnet::data {

// Defaults reproduce the published train/val/test proportions
// (1227/443/442 out of 2112 assigned clips, ~58/21/21).
struct SplitRatios {
    double train = 1227.0 / 2112.0;
    double val = 443.0 / 2112.0;
    double test = 442.0 / 2112.0;
};

struct SplitCounts {
    int64_t train = 0;
    int64_t val = 0;
    int64_t test = 0;
};

// Assigns every clip to exactly one of train/val/test in place.
//
// Stratified by exercise_id: each class contributes at least one clip to each
// split, with per-class val/test quotas of floor(n_c * ratio) corrected to the
// global targets round(N * ratio) by largest remainder. Within a class, clips
// are ordered canonically by (source_video, start) and shuffled with a
// per-class stream forked from `seed`, so assignment is deterministic and
// independent of input order.
//
// Throws std::invalid_argument for bad ratios and a stratification
// std::runtime_error naming the class when a class has fewer than 3 clips.
// `class_names` (indexed by exercise_id) is optional and only improves error
// messages.
SplitCounts build_splits(std::vector<Clip>& clips, const SplitRatios& ratios, uint64_t seed,
                         const std::vector<std::string>& class_names = {});

}  // namespace exnet::data
