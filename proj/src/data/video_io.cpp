#include "exnet/data/video_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#ifdef EXNET_WITH_OPENCV
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>
#endif

namespace exnet::data {
namespace {

constexpr char kMagic[4] = {'R', 'V', 'I', 'D'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path, const char* what) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("rawvid '" + path + "': truncated while reading " + what);
    return value;
}

std::string lower_extension(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return ext;
}

class RawVidReader final : public VideoReader {
public:
    explicit RawVidReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw std::runtime_error("cannot open video file '" + path + "'");
        char magic[4];
        in_.read(magic, 4);
        if (!in_ || std::memcmp(magic, kMagic, 4) != 0)
            throw std::runtime_error("rawvid '" + path + "': bad magic");
        const auto version = read_le<uint32_t>(in_, path, "version");
        if (version != kVersion)
            throw std::runtime_error("rawvid '" + path + "': unsupported version " +
                                     std::to_string(version));
        width_ = read_le<uint32_t>(in_, path, "width");
        height_ = read_le<uint32_t>(in_, path, "height");
        fps_ = read_le<double>(in_, path, "fps");
        frame_count_ = int64_t(read_le<uint64_t>(in_, path, "frame count"));
        if (width_ == 0 || height_ == 0)
            throw std::runtime_error("rawvid '" + path + "': zero frame dimensions");
        header_bytes_ = int64_t(in_.tellg());
        frame_bytes_ = int64_t(width_) * height_ * 3;

        in_.seekg(0, std::ios::end);
        const int64_t payload = int64_t(in_.tellg()) - header_bytes_;
        if (payload < frame_count_ * frame_bytes_)
            throw std::runtime_error("rawvid '" + path + "': truncated frame data");
    }

    double fps() const override { return fps_; }
    int64_t frame_count() const override { return frame_count_; }
    int64_t width() const override { return width_; }
    int64_t height() const override { return height_; }

    Tensor read_frame(int64_t index) override {
        if (index < 0 || index >= frame_count_)
            throw std::out_of_range("rawvid '" + path_ + "': frame " + std::to_string(index) +
                                    " out of range [0, " + std::to_string(frame_count_) + ")");
        in_.clear();
        in_.seekg(header_bytes_ + index * frame_bytes_);
        std::vector<uint8_t> raw(static_cast<size_t>(frame_bytes_));
        in_.read(reinterpret_cast<char*>(raw.data()), frame_bytes_);
        if (!in_) throw std::runtime_error("rawvid '" + path_ + "': failed to read frame data");

        Tensor frame({3, int64_t(height_), int64_t(width_)});
        const int64_t plane = int64_t(height_) * width_;
        float* dst = frame.data();
        for (int64_t p = 0; p < plane; ++p)
            for (int64_t c = 0; c < 3; ++c)
                dst[c * plane + p] = float(raw[size_t(p * 3 + c)]) / 255.0f;
        return frame;
    }

private:
    std::string path_;
    std::ifstream in_;
    uint32_t width_ = 0;
    uint32_t height_ = 0;
    double fps_ = 0.0;
    int64_t frame_count_ = 0;
    int64_t header_bytes_ = 0;
    int64_t frame_bytes_ = 0;
};

#ifdef EXNET_WITH_OPENCV
class OpenCvReader final : public VideoReader {
public:
    explicit OpenCvReader(const std::string& path) : path_(path), cap_(path) {
        if (!cap_.isOpened()) throw std::runtime_error("cannot open video file '" + path + "'");
        fps_ = cap_.get(cv::CAP_PROP_FPS);
        frame_count_ = int64_t(cap_.get(cv::CAP_PROP_FRAME_COUNT));
        width_ = int64_t(cap_.get(cv::CAP_PROP_FRAME_WIDTH));
        height_ = int64_t(cap_.get(cv::CAP_PROP_FRAME_HEIGHT));
    }

    double fps() const override { return fps_; }
    int64_t frame_count() const override { return frame_count_; }
    int64_t width() const override { return width_; }
    int64_t height() const override { return height_; }

    Tensor read_frame(int64_t index) override {
        if (index < 0 || index >= frame_count_)
            throw std::out_of_range("video '" + path_ + "': frame " + std::to_string(index) +
                                    " out of range [0, " + std::to_string(frame_count_) + ")");
        if (index != next_index_) {
            cap_.set(cv::CAP_PROP_POS_FRAMES, double(index));
            next_index_ = index;
        }
        cv::Mat bgr;
        if (!cap_.read(bgr) || bgr.empty())
            throw std::runtime_error("video '" + path_ + "': failed to decode frame " +
                                     std::to_string(index));
        ++next_index_;
        cv::Mat rgb;
        cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);

        Tensor frame({3, int64_t(rgb.rows), int64_t(rgb.cols)});
        const int64_t plane = int64_t(rgb.rows) * rgb.cols;
        float* dst = frame.data();
        for (int64_t y = 0; y < rgb.rows; ++y) {
            const uint8_t* row = rgb.ptr<uint8_t>(int(y));
            for (int64_t x = 0; x < rgb.cols; ++x)
                for (int64_t c = 0; c < 3; ++c)
                    dst[c * plane + y * rgb.cols + x] = float(row[x * 3 + c]) / 255.0f;
        }
        return frame;
    }

private:
    std::string path_;
    cv::VideoCapture cap_;
    double fps_ = 0.0;
    int64_t frame_count_ = 0;
    int64_t width_ = 0;
    int64_t height_ = 0;
    int64_t next_index_ = 0;
};
#endif

}  // namespace

std::unique_ptr<VideoReader> open_video(const std::string& path) {
    const std::string ext = lower_extension(path);
    if (ext == "rawvid") return std::make_unique<RawVidReader>(path);
    if (ext == "mp4" || ext == "avi" || ext == "mov" || ext == "mkv" || ext == "webm") {
#ifdef EXNET_WITH_OPENCV
        return std::make_unique<OpenCvReader>(path);
#else
        throw std::runtime_error("cannot open '" + path +
                                 "': built without OpenCV, only .rawvid is supported");
#endif
    }
    throw std::runtime_error("unsupported video extension '" + ext + "' for '" + path + "'");
}

bool opencv_backend_available() {
#ifdef EXNET_WITH_OPENCV
    return true;
#else
    return false;
#endif
}

void write_rawvid(const std::string& path, const std::vector<std::vector<uint8_t>>& frames,
                  int64_t width, int64_t height, double fps) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("rawvid: frame dimensions must be positive");
    const size_t frame_bytes = size_t(width) * size_t(height) * 3;
    for (const auto& f : frames)
        if (f.size() != frame_bytes)
            throw std::invalid_argument("rawvid: frame byte count mismatch (expected " +
                                        std::to_string(frame_bytes) + ", got " +
                                        std::to_string(f.size()) + ")");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write video file '" + path + "'");
    out.write(kMagic, 4);
    write_le<uint32_t>(out, kVersion);
    write_le<uint32_t>(out, uint32_t(width));
    write_le<uint32_t>(out, uint32_t(height));
    write_le<double>(out, fps);
    write_le<uint64_t>(out, uint64_t(frames.size()));
    for (const auto& f : frames) out.write(reinterpret_cast<const char*>(f.data()), std::streamsize(f.size()));
    if (!out) throw std::runtime_error("failed while writing '" + path + "'");
}

}  // namespace exnet::data
