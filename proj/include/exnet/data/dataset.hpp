#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exnet/core/rng.hpp"
#include "exnet/core/tensor.hpp"
#include "exnet/data/clips.hpp"
#include "exnet/data/exercises.hpp"
#include "exnet/data/preprocess.hpp"

namespace exnet::data {

// Clip collection bound to a corpus on disk: yields preprocessed tensors,
// exercise labels (taxonomy class ids), and multi-hot muscle targets.
class ClipDataset {
public:
    // `split` filters the manifest ("train"/"val"/"test"); empty keeps all
    // clips. Class ids in the clips index `taxonomy.classes()`; muscle targets
    // are looked up in the muscle map by class name.
    ClipDataset(const Manifest& manifest, std::string dataset_root, Taxonomy taxonomy,
                MuscleMap muscle_map, PreprocessOptions opts = {}, const std::string& split = "");

    int64_t size() const { return int64_t(clips_.size()); }
    const Clip& clip(int64_t i) const { return clips_[size_t(i)]; }
    const PreprocessOptions& options() const { return opts_; }
    int64_t num_classes() const { return taxonomy_.num_classes(); }
    int64_t num_muscles() const { return muscle_map_.num_muscles(); }

    int label(int64_t i) const { return clips_[size_t(i)].exercise_id; }
    // Multi-hot (len num_muscles) muscle targets for clip i's exercise.
    std::vector<float> muscle_target(int64_t i) const;

    // Preprocessed (3, frames, size, size) tensor for clip i. Training mode
    // draws the temporal window from `rng`; evaluation is deterministic.
    Tensor load(int64_t i, bool evaluation, Rng& rng) const;

    // Batched loads for index list `ids`: clip tensor (B,3,F,S,S), labels,
    // and muscle targets (B, num_muscles).
    Tensor load_batch(const std::vector<int64_t>& ids, bool evaluation, Rng& rng) const;
    std::vector<int> labels(const std::vector<int64_t>& ids) const;
    Tensor muscle_targets(const std::vector<int64_t>& ids) const;

    // Decodes every clip's frames into memory so repeated epochs skip disk
    // and container parsing. Intended for small datasets.
    void cache_frames();

private:
    std::vector<Clip> clips_;
    std::string root_;
    Taxonomy taxonomy_;
    MuscleMap muscle_map_;
    PreprocessOptions opts_;
    std::vector<int> class_to_muscle_exercise_;  // taxonomy class id -> muscle-map exercise id

    bool cached_ = false;
    std::vector<std::vector<Tensor>> frame_cache_;
    std::vector<double> fps_cache_;
};

}  // namespace exnet::data
