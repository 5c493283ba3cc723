#include "exnet/data/prepare.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "exnet/core/log.hpp"
#include "exnet/data/video_io.hpp"

namespace fs = std::filesystem;

namespace exnet::data {
namespace {

bool is_video_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return ext == ".rawvid" || ext == ".mp4" || ext == ".avi" || ext == ".mov" ||
           ext == ".mkv" || ext == ".webm";
}

}  // namespace

Manifest scan_corpus(const std::string& dataset_root, const Taxonomy& taxonomy) {
    const fs::path root(dataset_root);
    if (!fs::is_directory(root))
        throw std::runtime_error("dataset root '" + dataset_root + "' is not a directory");

    std::vector<std::string> folders;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) folders.push_back(entry.path().filename().string());
    std::sort(folders.begin(), folders.end());

    std::set<std::string> covered;
    Manifest manifest;
    for (const auto& folder : folders) {
        const std::string& canonical = taxonomy.canonical(folder);  // throws on unknown folders
        const int class_id = taxonomy.class_id(canonical);
        covered.insert(canonical);

        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(root / folder))
            if (entry.is_regular_file() && is_video_file(entry.path()))
                files.push_back(entry.path().filename().string());
        std::sort(files.begin(), files.end());

        for (const auto& file : files) {
            const std::string rel = folder + "/" + file;
            const auto video = open_video((root / folder / file).string());
            const double duration = video->duration_seconds();
            const auto intervals = split_video_into_clips(duration);
            if (intervals.empty()) {
                log_warning("skipping '" + rel + "': duration " + std::to_string(duration) +
                            " s is below the 2 s clip minimum");
                continue;
            }
            for (size_t k = 0; k < intervals.size(); ++k) {
                Clip clip;
                clip.clip_id = rel + "#" + std::to_string(k);
                clip.source_video = rel;
                clip.start = intervals[k].first;
                clip.end = intervals[k].second;
                clip.exercise_id = class_id;
                manifest.clips.push_back(std::move(clip));
            }
        }
    }

    for (const auto& cls : taxonomy.classes())
        if (!covered.count(cls))
            throw std::runtime_error("preparation error: no directory for class '" + cls +
                                     "' found under '" + dataset_root + "'");
    return manifest;
}

PrepareResult prepare_dataset(const std::string& dataset_root, const Taxonomy& taxonomy,
                              const MuscleMap& muscle_map, uint64_t seed,
                              const std::string& out_dir, const SplitRatios& ratios) {
    for (const auto& cls : taxonomy.classes())
        muscle_map.exercise_id(cls);  // throws if a class has no muscle labels

    PrepareResult result;
    result.manifest = scan_corpus(dataset_root, taxonomy);
    result.counts = build_splits(result.manifest.clips, ratios, seed, taxonomy.classes());

    fs::create_directories(out_dir);
    result.manifest_path = (fs::path(out_dir) / "manifest.csv").string();
    result.summary_path = (fs::path(out_dir) / "summary.json").string();
    result.manifest.save_csv(result.manifest_path);

    const auto num_classes = size_t(taxonomy.num_classes());
    std::vector<std::array<int64_t, 3>> per_class(num_classes, {0, 0, 0});
    for (const auto& clip : result.manifest.clips) {
        auto& row = per_class[size_t(clip.exercise_id)];
        if (clip.split == "train")
            ++row[0];
        else if (clip.split == "val")
            ++row[1];
        else
            ++row[2];
    }

    nlohmann::json summary;
    summary["total_clips"] = result.manifest.clips.size();
    summary["seed"] = seed;
    summary["splits"] = {{"train", result.counts.train},
                         {"val", result.counts.val},
                         {"test", result.counts.test}};
    summary["classes"] = nlohmann::json::array();
    for (size_t c = 0; c < num_classes; ++c) {
        summary["classes"].push_back({{"name", taxonomy.classes()[c]},
                                      {"train", per_class[c][0]},
                                      {"val", per_class[c][1]},
                                      {"test", per_class[c][2]},
                                      {"total", per_class[c][0] + per_class[c][1] + per_class[c][2]}});
    }
    std::ofstream out(result.summary_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write summary '" + result.summary_path + "'");
    out << summary.dump(2) << "\n";

    log_info("prepared " + std::to_string(result.manifest.clips.size()) + " clips: train " +
             std::to_string(result.counts.train) + ", val " + std::to_string(result.counts.val) +
             ", test " + std::to_string(result.counts.test));
    return result;
}

}  // namespace exnet::data
