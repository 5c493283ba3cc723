#include "exnet/data/toy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "exnet/core/rng.hpp"
#include "exnet/data/video_io.hpp"

namespace fs = std::filesystem;

namespace exnet::data {
namespace {

uint8_t clamp_u8(double v) { return uint8_t(std::clamp(v, 0.0, 255.0)); }

// One toy frame: a bright/dark vertical split with a class-specific color
// tint, plus a bar that sweeps over time (horizontal bar for class 0,
// vertical for class 1) so the temporal pathways see motion.
std::vector<uint8_t> toy_frame(int cls, int64_t size, double phase, double brightness, Rng& rng) {
    std::vector<uint8_t> frame(size_t(size * size * 3));
    const double bar_center = (0.5 + 0.4 * std::sin(phase)) * double(size);
    const double bar_half = double(size) / 12.0;
    for (int64_t y = 0; y < size; ++y) {
        for (int64_t x = 0; x < size; ++x) {
            const bool bright_half = cls == 0 ? (x < size / 2) : (x >= size / 2);
            double r, g, b;
            if (bright_half) {
                r = cls == 0 ? 220.0 : 60.0;
                g = 60.0;
                b = cls == 0 ? 60.0 : 220.0;
            } else {
                r = g = b = 38.0;
            }
            const double along = cls == 0 ? double(y) : double(x);
            if (std::fabs(along - bar_center) <= bar_half) {
                r = std::min(255.0, r + 90.0);
                g = std::min(255.0, g + 90.0);
                b = std::min(255.0, b + 90.0);
            }
            const size_t base = size_t((y * size + x) * 3);
            frame[base + 0] = clamp_u8(r + brightness + rng.uniform(-10.0, 10.0));
            frame[base + 1] = clamp_u8(g + brightness + rng.uniform(-10.0, 10.0));
            frame[base + 2] = clamp_u8(b + brightness + rng.uniform(-10.0, 10.0));
        }
    }
    return frame;
}

}  // namespace

ToyCorpus generate_toy_corpus(const std::string& dir, int clips_per_class, uint64_t seed,
                              int64_t frame_size, double fps) {
    if (clips_per_class < 1) throw std::invalid_argument("clips_per_class must be positive");
    ToyCorpus corpus;
    corpus.classes = {"Push-up", "Squat"};
    corpus.videos_dir = (fs::path(dir) / "videos").string();
    corpus.taxonomy_path = (fs::path(dir) / "taxonomy.json").string();

    Rng root(seed);
    const auto frame_count = int64_t(llround(2.5 * fps));  // 2.5 s -> exactly one clip
    for (int cls = 0; cls < 2; ++cls) {
        const fs::path class_dir = fs::path(corpus.videos_dir) / corpus.classes[size_t(cls)];
        fs::create_directories(class_dir);
        for (int v = 0; v < clips_per_class; ++v) {
            Rng rng = root.fork(uint64_t(cls * 1000 + v));
            const double phase0 = rng.uniform(0.0, 6.283185307179586);
            const double brightness = rng.uniform(-15.0, 15.0);
            std::vector<std::vector<uint8_t>> frames;
            frames.reserve(size_t(frame_count));
            for (int64_t f = 0; f < frame_count; ++f) {
                const double phase = phase0 + 2.0 * 6.283185307179586 * double(f) / double(frame_count);
                frames.push_back(toy_frame(cls, frame_size, phase, brightness, rng));
            }
            char name[64];
            std::snprintf(name, sizeof(name), "clip_%02d.rawvid", v);
            write_rawvid((class_dir / name).string(), frames, frame_size, frame_size, fps);
        }
    }

    std::ofstream tax(corpus.taxonomy_path, std::ios::binary | std::ios::trunc);
    if (!tax) throw std::runtime_error("cannot write '" + corpus.taxonomy_path + "'");
    tax << "{\n  \"Push-up\": \"Push-up\",\n  \"Squat\": \"Squat\"\n}\n";
    return corpus;
}

void generate_synthetic_corpus(const std::string& videos_dir,
                               const std::vector<std::pair<std::string, int>>& class_clip_counts,
                               uint64_t seed, int64_t frame_size, double fps) {
    Rng root(seed);
    uint64_t salt = 0;
    for (const auto& [name, wanted] : class_clip_counts) {
        if (wanted < 1)
            throw std::invalid_argument("class '" + name + "' requested " +
                                        std::to_string(wanted) + " clips");
        const fs::path class_dir = fs::path(videos_dir) / name;
        fs::create_directories(class_dir);
        Rng rng = root.fork(salt++);
        const double shade = 40.0 + 170.0 * rng.uniform();

        int remaining = wanted;
        int video_index = 0;
        while (remaining > 0) {
            // Every third video carries two clips so multi-clip tiling is
            // exercised; the rest carry one.
            const int clips_here = (remaining >= 2 && video_index % 3 == 2) ? 2 : 1;
            const auto frame_count =
                int64_t(llround((clips_here == 2 ? 4.5 : 2.5) * fps));
            std::vector<std::vector<uint8_t>> frames;
            frames.reserve(size_t(frame_count));
            for (int64_t f = 0; f < frame_count; ++f) {
                std::vector<uint8_t> frame(size_t(frame_size * frame_size * 3));
                for (auto& px : frame) px = clamp_u8(shade + rng.uniform(-20.0, 20.0));
                frames.push_back(std::move(frame));
            }
            char file[64];
            std::snprintf(file, sizeof(file), "vid_%04d.rawvid", video_index++);
            write_rawvid((class_dir / file).string(), frames, frame_size, frame_size, fps);
            remaining -= clips_here;
        }
    }
}

}  // namespace exnet::data
