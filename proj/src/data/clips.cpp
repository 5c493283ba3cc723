#include "exnet/data/clips.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace exnet::data {

std::vector<std::pair<double, double>> split_video_into_clips(double video_duration) {
    if (video_duration < 0.0)
        throw std::invalid_argument("video duration must be non-negative, got " +
                                    std::to_string(video_duration));
    if (video_duration < 2.0) return {};
    const auto n = int64_t(std::floor(video_duration / 2.0));
    std::vector<std::pair<double, double>> intervals;
    intervals.reserve(size_t(n));
    for (int64_t i = 0; i < n; ++i) {
        const double start = video_duration * double(i) / double(n);
        const double end = i + 1 == n ? video_duration : video_duration * double(i + 1) / double(n);
        intervals.emplace_back(start, end);
    }
    return intervals;
}

namespace {

std::string format_seconds(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Fields never contain commas in practice (ids and file paths we generate),
// but quote defensively if one does.
std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> parse_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

constexpr const char* kHeader = "clip_id,source_video,start,end,exercise_id,split";

}  // namespace

void Manifest::save_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest '" + path + "'");
    out << kHeader << "\n";
    for (const auto& c : clips) {
        out << csv_escape(c.clip_id) << ',' << csv_escape(c.source_video) << ','
            << format_seconds(c.start) << ',' << format_seconds(c.end) << ',' << c.exercise_id
            << ',' << c.split << "\n";
    }
    if (!out) throw std::runtime_error("failed while writing manifest '" + path + "'");
}

Manifest Manifest::load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open manifest '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("manifest '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        throw std::runtime_error("manifest '" + path + "': unexpected header '" + line + "'");

    Manifest m;
    size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = parse_csv_row(line);
        if (fields.size() != 6)
            throw std::runtime_error("manifest '" + path + "' row " + std::to_string(row) +
                                     ": expected 6 fields, got " + std::to_string(fields.size()));
        Clip c;
        c.clip_id = fields[0];
        c.source_video = fields[1];
        try {
            c.start = std::stod(fields[2]);
            c.end = std::stod(fields[3]);
            c.exercise_id = std::stoi(fields[4]);
        } catch (const std::exception&) {
            throw std::runtime_error("manifest '" + path + "' row " + std::to_string(row) +
                                     ": malformed numeric field");
        }
        c.split = fields[5];
        m.clips.push_back(std::move(c));
    }
    return m;
}

std::vector<Clip> Manifest::split_clips(const std::string& split) const {
    std::vector<Clip> out;
    for (const auto& c : clips)
        if (c.split == split) out.push_back(c);
    return out;
}

}  // namespace exnet::data
