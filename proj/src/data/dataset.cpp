#include "exnet/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "exnet/data/video_io.hpp"

namespace exnet::data {

ClipDataset::ClipDataset(const Manifest& manifest, std::string dataset_root, Taxonomy taxonomy,
                         MuscleMap muscle_map, PreprocessOptions opts, const std::string& split)
    : root_(std::move(dataset_root)),
      taxonomy_(std::move(taxonomy)),
      muscle_map_(std::move(muscle_map)),
      opts_(opts) {
    for (const auto& clip : manifest.clips) {
        if (!split.empty() && clip.split != split) continue;
        if (clip.exercise_id < 0 || clip.exercise_id >= taxonomy_.num_classes())
            throw std::invalid_argument("clip '" + clip.clip_id + "' has exercise id " +
                                        std::to_string(clip.exercise_id) +
                                        " outside the taxonomy");
        clips_.push_back(clip);
    }
    class_to_muscle_exercise_.reserve(size_t(taxonomy_.num_classes()));
    for (const auto& cls : taxonomy_.classes())
        class_to_muscle_exercise_.push_back(muscle_map_.exercise_id(cls));
}

std::vector<float> ClipDataset::muscle_target(int64_t i) const {
    return muscle_map_.target_row(class_to_muscle_exercise_[size_t(label(i))]);
}

Tensor ClipDataset::load(int64_t i, bool evaluation, Rng& rng) const {
    if (i < 0 || i >= size()) throw std::out_of_range("ClipDataset::load: index out of range");
    if (cached_)
        return preprocess_frames(frame_cache_[size_t(i)], fps_cache_[size_t(i)], evaluation, rng,
                                 opts_);
    const auto& c = clips_[size_t(i)];
    const auto video = open_video((std::filesystem::path(root_) / c.source_video).string());
    return preprocess_clip(*video, c, evaluation, rng, opts_);
}

Tensor ClipDataset::load_batch(const std::vector<int64_t>& ids, bool evaluation, Rng& rng) const {
    if (ids.empty()) throw std::invalid_argument("ClipDataset::load_batch: empty index list");
    Tensor batch;
    for (size_t b = 0; b < ids.size(); ++b) {
        const Tensor clip = load(ids[b], evaluation, rng);
        if (b == 0) {
            std::vector<int64_t> shape = {int64_t(ids.size())};
            for (int d = 0; d < clip.ndim(); ++d) shape.push_back(clip.dim(d));
            batch = Tensor(shape);
        }
        std::copy(clip.data(), clip.data() + clip.numel(),
                  batch.data() + int64_t(b) * clip.numel());
    }
    return batch;
}

std::vector<int> ClipDataset::labels(const std::vector<int64_t>& ids) const {
    std::vector<int> out;
    out.reserve(ids.size());
    for (int64_t i : ids) out.push_back(label(i));
    return out;
}

Tensor ClipDataset::muscle_targets(const std::vector<int64_t>& ids) const {
    std::vector<int> mapped;
    mapped.reserve(ids.size());
    for (int64_t i : ids) mapped.push_back(class_to_muscle_exercise_[size_t(label(i))]);
    return muscle_map_.targets(mapped);
}

void ClipDataset::cache_frames() {
    if (cached_) return;
    frame_cache_.resize(clips_.size());
    fps_cache_.resize(clips_.size());
    for (size_t i = 0; i < clips_.size(); ++i) {
        const auto& c = clips_[i];
        const auto video = open_video((std::filesystem::path(root_) / c.source_video).string());
        const double fps = video->fps();
        int64_t begin = 0;
        int64_t end = video->frame_count();
        if (fps > 0.0) {
            begin = std::max<int64_t>(0, int64_t(std::ceil(c.start * fps - 1e-9)));
            end = std::min<int64_t>(video->frame_count(),
                                    int64_t(std::ceil(c.end * fps - 1e-9)));
        }
        if (end <= begin)
            throw std::runtime_error("decode error: clip '" + c.clip_id +
                                     "' covers no frames of '" + c.source_video + "'");
        auto& frames = frame_cache_[i];
        frames.reserve(size_t(end - begin));
        for (int64_t f = begin; f < end; ++f) frames.push_back(video->read_frame(f));
        fps_cache_[i] = fps;
    }
    cached_ = true;
}

}  // namespace exnet::data
