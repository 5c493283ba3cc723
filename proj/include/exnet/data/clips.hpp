#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace exnet::data {

// One labeled clip: a [start, end) second interval of a source video.
struct Clip {
    std::string clip_id;
    std::string source_video;
    double start = 0.0;
    double end = 0.0;
    int exercise_id = -1;
    std::string split;  // "train" | "val" | "test", empty until assigned

    double duration() const { return end - start; }
};

// Tiles [0, duration] with n = floor(duration / 2) equal-length intervals, so
// every interval length lies in [2, 4). Durations under 2 s yield no clips.
// Throws std::invalid_argument on negative durations.
std::vector<std::pair<double, double>> split_video_into_clips(double video_duration);

// Split manifest, persisted as CSV with a fixed header:
//   clip_id,source_video,start,end,exercise_id,split
// Rows keep insertion order; floats are written with 6 decimal places so
// reruns are byte-identical.
struct Manifest {
    std::vector<Clip> clips;

    void save_csv(const std::string& path) const;
    static Manifest load_csv(const std::string& path);

    std::vector<Clip> split_clips(const std::string& split) const;
};

}  // namespace exnet::data
