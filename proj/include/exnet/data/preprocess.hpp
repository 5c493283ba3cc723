#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "exnet/core/rng.hpp"
#include "exnet/core/tensor.hpp"
#include "exnet/data/clips.hpp"
#include "exnet/data/video_io.hpp"

namespace exnet::data {

struct PreprocessOptions {
    int64_t frames = 32;
    int64_t size = 256;
    double window_seconds = 2.0;
    std::array<float, 3> mean = {0.45f, 0.45f, 0.45f};
    std::array<float, 3> stddev = {0.225f, 0.225f, 0.225f};
};

// Uniform temporal subsampling: `wanted` indices into [0, available) computed
// as floor(j * (available-1) / (wanted-1)). Non-decreasing, always includes
// the first and last frame; repeats indices when available < wanted.
std::vector<int64_t> subsample_indices(int64_t available, int64_t wanted);

// Bilinear resize of a (C,H,W) tensor using half-pixel-center sampling.
Tensor resize_bilinear(const Tensor& chw, int64_t out_h, int64_t out_w);

// In-place (x - mean[c]) / stddev[c] on a (C,T,H,W) tensor.
void normalize_inplace(Tensor& clip, const std::array<float, 3>& mean,
                       const std::array<float, 3>& stddev);

// Picks the frame window covering `window_seconds` inside a clip of
// `frame_count` frames: uniformly random offset in training, centered in
// evaluation. Returns (first_frame, window_frames); the window is the whole
// clip when the clip is shorter than the requested span.
std::pair<int64_t, int64_t> choose_window(int64_t frame_count, double fps, double window_seconds,
                                          bool evaluation, Rng& rng);

// Full pipeline over already-decoded (3,H,W) frames in [0,1]:
// window choice -> temporal subsample -> spatial resize -> normalization.
// Returns a (3, frames, size, size) tensor. Fewer frames than requested are
// repeat-padded with a logged warning; zero frames raise a decode error.
Tensor preprocess_frames(const std::vector<Tensor>& raw_frames, double fps, bool evaluation,
                         Rng& rng, const PreprocessOptions& opts = {});

// Decodes the clip's [start, end) interval from its source video (reading
// only the frames the subsampling selects) and preprocesses it.
Tensor preprocess_clip(VideoReader& video, const Clip& clip, bool evaluation, Rng& rng,
                       const PreprocessOptions& opts = {});

// Adapts a preprocessed (C,T,H,W) clip to a network's input geometry by
// temporal subsampling and bilinear spatial resize. Identity when the
// geometry already matches.
Tensor adapt_clip(const Tensor& clip, int64_t out_frames, int64_t out_h, int64_t out_w);

}  // namespace exnet::data
