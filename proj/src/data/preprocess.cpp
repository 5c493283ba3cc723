#include "exnet/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "exnet/core/log.hpp"

namespace exnet::data {

std::vector<int64_t> subsample_indices(int64_t available, int64_t wanted) {
    if (available < 1) throw std::invalid_argument("subsample_indices: no frames available");
    if (wanted < 1) throw std::invalid_argument("subsample_indices: must request at least one frame");
    std::vector<int64_t> idx(static_cast<size_t>(wanted));
    if (wanted == 1) {
        idx[0] = 0;
        return idx;
    }
    for (int64_t j = 0; j < wanted; ++j) idx[size_t(j)] = j * (available - 1) / (wanted - 1);
    return idx;
}

Tensor resize_bilinear(const Tensor& chw, int64_t out_h, int64_t out_w) {
    if (chw.ndim() != 3) throw std::invalid_argument("resize_bilinear: expected (C,H,W) tensor");
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument("resize_bilinear: output dimensions must be positive");
    const int64_t c = chw.dim(0), in_h = chw.dim(1), in_w = chw.dim(2);
    if (in_h == out_h && in_w == out_w) return chw;

    Tensor out({c, out_h, out_w});
    const double scale_y = double(in_h) / double(out_h);
    const double scale_x = double(in_w) / double(out_w);
    const float* src = chw.data();
    float* dst = out.data();
    for (int64_t y = 0; y < out_h; ++y) {
        double sy = (double(y) + 0.5) * scale_y - 0.5;
        sy = std::clamp(sy, 0.0, double(in_h - 1));
        const int64_t y0 = int64_t(sy);
        const int64_t y1 = std::min(y0 + 1, in_h - 1);
        const float wy = float(sy - double(y0));
        for (int64_t x = 0; x < out_w; ++x) {
            double sx = (double(x) + 0.5) * scale_x - 0.5;
            sx = std::clamp(sx, 0.0, double(in_w - 1));
            const int64_t x0 = int64_t(sx);
            const int64_t x1 = std::min(x0 + 1, in_w - 1);
            const float wx = float(sx - double(x0));
            for (int64_t ch = 0; ch < c; ++ch) {
                const float* plane = src + ch * in_h * in_w;
                const float top = plane[y0 * in_w + x0] * (1.0f - wx) + plane[y0 * in_w + x1] * wx;
                const float bot = plane[y1 * in_w + x0] * (1.0f - wx) + plane[y1 * in_w + x1] * wx;
                dst[(ch * out_h + y) * out_w + x] = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return out;
}

void normalize_inplace(Tensor& clip, const std::array<float, 3>& mean,
                       const std::array<float, 3>& stddev) {
    if (clip.ndim() != 4 || clip.dim(0) != 3)
        throw std::invalid_argument("normalize_inplace: expected (3,T,H,W) tensor, got " +
                                    clip.shape_str());
    for (float s : stddev)
        if (s <= 0.0f) throw std::invalid_argument("normalize_inplace: stddev must be positive");
    const int64_t plane = clip.dim(1) * clip.dim(2) * clip.dim(3);
    float* data = clip.data();
    for (int64_t c = 0; c < 3; ++c) {
        const float m = mean[size_t(c)];
        const float inv = 1.0f / stddev[size_t(c)];
        float* p = data + c * plane;
        for (int64_t i = 0; i < plane; ++i) p[i] = (p[i] - m) * inv;
    }
}

std::pair<int64_t, int64_t> choose_window(int64_t frame_count, double fps, double window_seconds,
                                          bool evaluation, Rng& rng) {
    if (frame_count < 1) throw std::runtime_error("decode error: clip contains zero frames");
    int64_t window = frame_count;
    if (fps > 0.0 && window_seconds > 0.0)
        window = std::min(frame_count, std::max<int64_t>(1, llround(window_seconds * fps)));
    const int64_t slack = frame_count - window;
    const int64_t first =
        evaluation ? slack / 2 : (slack > 0 ? int64_t(rng.uniform_index(uint64_t(slack + 1))) : 0);
    return {first, window};
}

namespace {

// Shared tail of the pipeline: subsample `window` frames starting at `first`,
// resize, stack into (3,F,S,S), normalize. `fetch` returns the (3,H,W) frame
// at an absolute index and may be called with repeated, non-decreasing values.
Tensor assemble(const std::function<Tensor(int64_t)>& fetch, int64_t first, int64_t window,
                const PreprocessOptions& opts) {
    if (opts.frames < 1 || opts.size < 1)
        throw std::invalid_argument("preprocess: frames and size must be positive");
    if (window < opts.frames)
        log_warning("clip window has " + std::to_string(window) + " frames, fewer than " +
                    std::to_string(opts.frames) + "; repeating frames to pad");

    const auto indices = subsample_indices(window, opts.frames);
    Tensor out({3, opts.frames, opts.size, opts.size});
    float* dst = out.data();
    const int64_t frame_elems = opts.size * opts.size;

    Tensor resized;
    int64_t cached_index = -1;
    for (int64_t j = 0; j < opts.frames; ++j) {
        const int64_t src_index = first + indices[size_t(j)];
        if (src_index != cached_index) {
            Tensor frame = fetch(src_index);
            if (frame.ndim() != 3 || frame.dim(0) != 3)
                throw std::runtime_error("decode error: expected (3,H,W) frame, got " +
                                         frame.shape_str());
            resized = resize_bilinear(frame, opts.size, opts.size);
            cached_index = src_index;
        }
        const float* src = resized.data();
        for (int64_t c = 0; c < 3; ++c)
            std::copy(src + c * frame_elems, src + (c + 1) * frame_elems,
                      dst + (c * opts.frames + j) * frame_elems);
    }
    normalize_inplace(out, opts.mean, opts.stddev);
    return out;
}

}  // namespace

Tensor preprocess_frames(const std::vector<Tensor>& raw_frames, double fps, bool evaluation,
                         Rng& rng, const PreprocessOptions& opts) {
    if (raw_frames.empty()) throw std::runtime_error("decode error: clip contains zero frames");
    const auto [first, window] =
        choose_window(int64_t(raw_frames.size()), fps, opts.window_seconds, evaluation, rng);
    return assemble([&](int64_t i) { return raw_frames[size_t(i)]; }, first, window, opts);
}

Tensor preprocess_clip(VideoReader& video, const Clip& clip, bool evaluation, Rng& rng,
                       const PreprocessOptions& opts) {
    const double fps = video.fps();
    int64_t begin = 0;
    int64_t end = video.frame_count();
    if (fps > 0.0) {
        begin = std::max<int64_t>(0, int64_t(std::ceil(clip.start * fps - 1e-9)));
        end = std::min<int64_t>(video.frame_count(), int64_t(std::ceil(clip.end * fps - 1e-9)));
    }
    if (end <= begin)
        throw std::runtime_error("decode error: clip '" + clip.clip_id +
                                 "' covers no frames of '" + clip.source_video + "'");
    const auto [first, window] = choose_window(end - begin, fps, opts.window_seconds, evaluation, rng);
    return assemble([&](int64_t i) { return video.read_frame(begin + i); }, first, window, opts);
}

Tensor adapt_clip(const Tensor& clip, int64_t out_frames, int64_t out_h, int64_t out_w) {
    if (clip.ndim() != 4) throw std::invalid_argument("adapt_clip: expected (C,T,H,W) tensor");
    const int64_t c = clip.dim(0), t = clip.dim(1), h = clip.dim(2), w = clip.dim(3);
    if (t == out_frames && h == out_h && w == out_w) return clip;

    const auto indices = subsample_indices(t, out_frames);
    Tensor out({c, out_frames, out_h, out_w});
    const int64_t in_frame = h * w;
    const int64_t out_frame = out_h * out_w;
    Tensor staged({c, h, w});
    for (int64_t j = 0; j < out_frames; ++j) {
        const int64_t src_t = indices[size_t(j)];
        float* sp = staged.data();
        const float* cp = clip.data();
        for (int64_t ch = 0; ch < c; ++ch)
            std::copy(cp + (ch * t + src_t) * in_frame, cp + (ch * t + src_t + 1) * in_frame,
                      sp + ch * in_frame);
        const Tensor resized = resize_bilinear(staged, out_h, out_w);
        const float* rp = resized.data();
        float* op = out.data();
        for (int64_t ch = 0; ch < c; ++ch)
            std::copy(rp + ch * out_frame, rp + (ch + 1) * out_frame,
                      op + (ch * out_frames + j) * out_frame);
    }
    return out;
}

}  // namespace exnet::data
