#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "exnet/core/tensor.hpp"

namespace exnet::data {

// Random-access frame source. Frames are returned as (3,H,W) float tensors
// with values in [0,1], RGB channel order.
class VideoReader {
public:
    virtual ~VideoReader() = default;
    virtual double fps() const = 0;
    virtual int64_t frame_count() const = 0;
    virtual int64_t width() const = 0;
    virtual int64_t height() const = 0;
    virtual Tensor read_frame(int64_t index) = 0;

    double duration_seconds() const {
        return fps() > 0 ? double(frame_count()) / fps() : 0.0;
    }
};

// Opens .rawvid files with the built-in reader, and common container formats
// (.mp4/.avi/.mov/.mkv/.webm) with the optional OpenCV backend when it was
// compiled in. Throws on unsupported extensions or unreadable files.
std::unique_ptr<VideoReader> open_video(const std::string& path);

bool opencv_backend_available();

// Minimal uncompressed video container used by tests and the synthetic data
// generators (little-endian):
//   "RVID" | u32 version=1 | u32 width | u32 height | f64 fps |
//   u64 frame_count | frames as H*W*3 bytes of RGB
void write_rawvid(const std::string& path, const std::vector<std::vector<uint8_t>>& frames,
                  int64_t width, int64_t height, double fps);

}  // namespace exnet::data
