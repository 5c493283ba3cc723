#include "exnet/ensemble/ensemble.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace exnet::ensemble {

using nlohmann::json;

EnsembleWeights::EnsembleWeights(double x_weight, double s_weight)
    : x(x_weight), s(s_weight) {
    const bool in_range = x >= 0.0 && x <= 1.0 && s >= 0.0 && s <= 1.0;
    if (!in_range || std::abs(x + s - 1.0) > 1e-9) {
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "config error: ensemble weights must lie in [0, 1] and sum "
                      "to 1 (got x=%g, s=%g)",
                      x, s);
        throw std::invalid_argument(buf);
    }
}

std::string EnsembleWeights::label() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%d/%d", int(std::lround(x * 100.0)),
                  int(std::lround(s * 100.0)));
    return buf;
}

const std::vector<EnsembleWeights>& default_weight_grid() {
    static const std::vector<EnsembleWeights> grid = {
        EnsembleWeights(0.75, 0.25),
        EnsembleWeights(0.5, 0.5),
        EnsembleWeights(0.25, 0.75),
    };
    return grid;
}

std::vector<float> weighted_average(const std::vector<float>& x_logits,
                                    const std::vector<float>& s_logits,
                                    const EnsembleWeights& w) {
    if (x_logits.size() != s_logits.size()) {
        throw std::invalid_argument(
            "shape error: logit vectors have lengths " +
            std::to_string(x_logits.size()) + " and " +
            std::to_string(s_logits.size()));
    }
    std::vector<float> fused(x_logits.size());
    for (size_t i = 0; i < x_logits.size(); ++i) {
        fused[i] = float(w.x * double(x_logits[i]) + w.s * double(s_logits[i]));
    }
    return fused;
}

namespace {

void validate_record(const LogitRecord& rec) {
    if (rec.task != "EC" && rec.task != "MGAP") {
        throw std::invalid_argument("logit dump: unknown task '" + rec.task +
                                    "' for clip '" + rec.clip_id +
                                    "' (expected EC or MGAP)");
    }
    if (rec.clip_id.empty()) {
        throw std::invalid_argument("logit dump: record with empty clip_id");
    }
    if (rec.logits.empty()) {
        throw std::invalid_argument("logit dump: clip '" + rec.clip_id +
                                    "' has no logits");
    }
    if (rec.task == "EC") {
        if (rec.label.size() != 1 || rec.label[0] < 0 ||
            rec.label[0] >= int(rec.logits.size())) {
            throw std::invalid_argument(
                "logit dump: clip '" + rec.clip_id +
                "' needs a single class id in [0, " +
                std::to_string(rec.logits.size()) + ") as its EC label");
        }
    } else {
        if (rec.label.size() != rec.logits.size()) {
            throw std::invalid_argument(
                "logit dump: clip '" + rec.clip_id + "' has " +
                std::to_string(rec.label.size()) + " label entries for " +
                std::to_string(rec.logits.size()) + " logits");
        }
        for (int v : rec.label) {
            if (v != 0 && v != 1) {
                throw std::invalid_argument("logit dump: clip '" + rec.clip_id +
                                            "' has a non-binary MGAP label entry");
            }
        }
    }
}

}  // namespace

std::string logit_dump_to_jsonl(const std::vector<LogitRecord>& records) {
    std::string out;
    for (const LogitRecord& rec : records) {
        validate_record(rec);
        json j;
        j["clip_id"] = rec.clip_id;
        j["task"] = rec.task;
        j["logits"] = rec.logits;
        if (rec.task == "EC") {
            j["label"] = rec.label[0];
        } else {
            j["label"] = rec.label;
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<LogitRecord> logit_dump_from_jsonl(const std::string& text) {
    std::vector<LogitRecord> records;
    std::istringstream stream(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error("logit dump: line " + std::to_string(line_no) +
                                     " is not valid JSON: " + e.what());
        }
        if (!j.is_object() || !j.contains("clip_id") || !j.contains("task") ||
            !j.contains("logits") || !j.contains("label")) {
            throw std::runtime_error(
                "logit dump: line " + std::to_string(line_no) +
                " must be an object with clip_id, task, logits, label");
        }
        LogitRecord rec;
        rec.clip_id = j.at("clip_id").get<std::string>();
        rec.task = j.at("task").get<std::string>();
        rec.logits = j.at("logits").get<std::vector<float>>();
        const json& label = j.at("label");
        if (label.is_number_integer()) {
            rec.label = {label.get<int>()};
        } else if (label.is_array()) {
            rec.label = label.get<std::vector<int>>();
        } else {
            throw std::runtime_error("logit dump: line " + std::to_string(line_no) +
                                     " has a label that is neither an integer nor "
                                     "an array");
        }
        try {
            validate_record(rec);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("logit dump: line " + std::to_string(line_no) +
                                     ": " + e.what());
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void write_logit_dump(const std::string& path,
                      const std::vector<LogitRecord>& records) {
    const std::string text = logit_dump_to_jsonl(records);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out.write(text.data(), std::streamsize(text.size()));
    if (!out) {
        throw std::runtime_error("failed writing logit dump to '" + path + "'");
    }
}

std::vector<LogitRecord> read_logit_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open logit dump '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return logit_dump_from_jsonl(buffer.str());
}

AlignedDumps align_dumps(const std::vector<LogitRecord>& x_dump,
                         const std::vector<LogitRecord>& s_dump) {
    if (x_dump.empty() || s_dump.empty()) {
        throw std::runtime_error("alignment error: logit dump is empty");
    }
    std::unordered_map<std::string, const LogitRecord*> by_id;
    by_id.reserve(s_dump.size());
    for (const LogitRecord& rec : s_dump) {
        if (!by_id.emplace(rec.clip_id, &rec).second) {
            throw std::runtime_error("alignment error: clip '" + rec.clip_id +
                                     "' appears twice in the second dump");
        }
    }
    if (x_dump.size() != s_dump.size()) {
        // Find a concrete offender before reporting the size difference.
        for (const LogitRecord& rec : s_dump) {
            bool found = false;
            for (const LogitRecord& other : x_dump) {
                if (other.clip_id == rec.clip_id) {
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw std::runtime_error("alignment error: clip '" + rec.clip_id +
                                         "' is in the second dump but missing "
                                         "from the first");
            }
        }
    }

    const std::string& task = x_dump.front().task;
    const int64_t n = int64_t(x_dump.size());
    const int64_t width = int64_t(x_dump.front().logits.size());
    AlignedDumps aligned;
    aligned.task = task;
    aligned.clip_ids.reserve(x_dump.size());
    aligned.x_logits = Tensor({n, width});
    aligned.s_logits = Tensor({n, width});
    if (task == "MGAP") aligned.mgap_targets = Tensor({n, width});

    std::unordered_map<std::string, int> seen;
    seen.reserve(x_dump.size());
    for (int64_t row = 0; row < n; ++row) {
        const LogitRecord& xrec = x_dump[size_t(row)];
        validate_record(xrec);
        if (!seen.emplace(xrec.clip_id, 1).second) {
            throw std::runtime_error("alignment error: clip '" + xrec.clip_id +
                                     "' appears twice in the first dump");
        }
        const auto it = by_id.find(xrec.clip_id);
        if (it == by_id.end()) {
            throw std::runtime_error("alignment error: clip '" + xrec.clip_id +
                                     "' is in the first dump but missing from "
                                     "the second");
        }
        const LogitRecord& srec = *it->second;
        validate_record(srec);
        if (xrec.task != task || srec.task != task) {
            throw std::runtime_error("alignment error: clip '" + xrec.clip_id +
                                     "' mixes tasks " + xrec.task + " and " +
                                     srec.task);
        }
        if (int64_t(xrec.logits.size()) != width ||
            int64_t(srec.logits.size()) != width) {
            throw std::runtime_error(
                "alignment error: clip '" + xrec.clip_id + "' has " +
                std::to_string(xrec.logits.size()) + " logits in the first dump "
                "and " + std::to_string(srec.logits.size()) + " in the second "
                "(expected " + std::to_string(width) + ")");
        }
        if (xrec.label != srec.label) {
            throw std::runtime_error("alignment error: clip '" + xrec.clip_id +
                                     "' has different labels in the two dumps");
        }
        aligned.clip_ids.push_back(xrec.clip_id);
        for (int64_t c = 0; c < width; ++c) {
            aligned.x_logits[row * width + c] = xrec.logits[size_t(c)];
            aligned.s_logits[row * width + c] = srec.logits[size_t(c)];
        }
        if (task == "EC") {
            aligned.ec_labels.push_back(xrec.label[0]);
        } else {
            for (int64_t c = 0; c < width; ++c) {
                aligned.mgap_targets[row * width + c] = float(xrec.label[size_t(c)]);
            }
        }
    }
    return aligned;
}

EnsembleResult evaluate_ensemble(const std::vector<LogitRecord>& x_dump,
                                 const std::vector<LogitRecord>& s_dump,
                                 const EnsembleWeights& w) {
    const AlignedDumps aligned = align_dumps(x_dump, s_dump);
    const int64_t n = int64_t(aligned.clip_ids.size());
    const int64_t width = aligned.x_logits.dim(1);

    Tensor fused({n, width});
    for (int64_t i = 0; i < n * width; ++i) {
        fused[i] = float(w.x * double(aligned.x_logits[i]) +
                         w.s * double(aligned.s_logits[i]));
    }

    EnsembleResult result;
    result.weights = w;
    result.name = w.label();
    result.task = aligned.task;
    if (aligned.task == "EC") {
        result.ec = metrics::multiclass_metrics(fused, aligned.ec_labels);
    } else {
        Tensor probs({n, width});
        for (int64_t i = 0; i < n * width; ++i) {
            probs[i] = float(1.0 / (1.0 + std::exp(-double(fused[i]))));
        }
        result.mgap = metrics::multilabel_metrics(probs, aligned.mgap_targets);
    }
    return result;
}

std::vector<EnsembleResult> sweep(const std::vector<LogitRecord>& x_dump,
                                  const std::vector<LogitRecord>& s_dump,
                                  const std::vector<EnsembleWeights>& grid) {
    std::vector<EnsembleResult> rows;
    rows.reserve(grid.size());
    for (const EnsembleWeights& w : grid) {
        rows.push_back(evaluate_ensemble(x_dump, s_dump, w));
    }
    return rows;
}

}  // namespace exnet::ensemble
