#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace exnet::data {

// Tiny synthetic two-class corpus for overfitting sanity runs. Classes reuse
// real exercise names ("Push-up", "Squat") so the default muscle map applies;
// the classes are separable by color and by the orientation of a moving bar.
struct ToyCorpus {
    std::string videos_dir;
    std::string taxonomy_path;
    std::vector<std::string> classes;
};

// Writes `clips_per_class` videos per class (each yielding exactly one clip)
// under <dir>/videos plus a two-class taxonomy at <dir>/taxonomy.json.
ToyCorpus generate_toy_corpus(const std::string& dir, int clips_per_class = 4, uint64_t seed = 0,
                              int64_t frame_size = 64, double fps = 8.0);

// Writes a corpus whose scan yields exactly the requested number of clips per
// class, using minimal frames (mixing one- and two-clip videos). Content is
// per-class shaded noise; intended for split/manifest testing at scale.
void generate_synthetic_corpus(const std::string& videos_dir,
                               const std::vector<std::pair<std::string, int>>& class_clip_counts,
                               uint64_t seed = 0, int64_t frame_size = 8, double fps = 4.0);

}  // namespace exnet::data
