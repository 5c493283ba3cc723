#pragma once

#include <cstdint>
#include <string>

#include "exnet/data/clips.hpp"
#include "exnet/data/exercises.hpp"
#include "exnet/data/splits.hpp"

namespace exnet::data {

// Walks a corpus laid out as one directory per exercise under `dataset_root`,
// maps directory names through the taxonomy, tiles each video into clips, and
// returns the unassigned manifest (exercise_id = taxonomy class id,
// source_video relative to the root).
//
// Errors: a directory not covered by the taxonomy, or a taxonomy class with
// no directory present, raise std::runtime_error naming the offender.
Manifest scan_corpus(const std::string& dataset_root, const Taxonomy& taxonomy);

struct PrepareResult {
    Manifest manifest;
    SplitCounts counts;
    std::string manifest_path;
    std::string summary_path;
};

// Full dataset preparation: scan, validate the muscle map covers every class,
// build deterministic stratified splits, and write <out_dir>/manifest.csv plus
// <out_dir>/summary.json (per-class clip counts by split).
PrepareResult prepare_dataset(const std::string& dataset_root, const Taxonomy& taxonomy,
                              const MuscleMap& muscle_map, uint64_t seed,
                              const std::string& out_dir, const SplitRatios& ratios = {});

}  // namespace exnet::data
