#pragma once

#include <string>
#include <vector>

#include "exnet/core/tensor.hpp"
#include "exnet/metrics/metrics.hpp"

namespace exnet::ensemble {

// Convex weights for fusing two members' logits: `x` scales the first
// (X3D) member, `s` the second (SlowFast) member. Valid weights lie in
// [0, 1] and sum to 1 within 1e-9.
struct EnsembleWeights {
    double x = 0.5;
    double s = 0.5;

    EnsembleWeights() = default;
    // Throws std::invalid_argument ("config error: ...") on invalid weights.
    EnsembleWeights(double x_weight, double s_weight);

    // Percent label with the X3D share first, e.g. (0.25, 0.75) -> "25/75".
    std::string label() const;
};

// The grid evaluated by default: 75/25, 50/50, 25/75.
const std::vector<EnsembleWeights>& default_weight_grid();

// Elementwise fusion of pre-activation logits: V_i = x*X_i + s*S_i, computed
// in double precision. Softmax/sigmoid is applied only downstream. Throws
// std::invalid_argument ("shape error: ...") on length mismatch.
std::vector<float> weighted_average(const std::vector<float>& x_logits,
                                    const std::vector<float>& s_logits,
                                    const EnsembleWeights& w);

// One row of a logit dump: the model's raw output for one clip, plus the
// ground truth. For task "EC" the label is a single class id (vector of one
// element); for task "MGAP" it is a multi-hot vector over the muscle groups.
struct LogitRecord {
    std::string clip_id;
    std::string task;  // "EC" or "MGAP"
    std::vector<float> logits;
    std::vector<int> label;

    bool operator==(const LogitRecord&) const = default;
};

// JSON-lines serialization: one object per record with fields
// clip_id, task, logits, label. EC labels serialize as a bare integer,
// MGAP labels as an array of 0/1. Numbers round-trip exactly.
std::string logit_dump_to_jsonl(const std::vector<LogitRecord>& records);
std::vector<LogitRecord> logit_dump_from_jsonl(const std::string& text);
void write_logit_dump(const std::string& path, const std::vector<LogitRecord>& records);
std::vector<LogitRecord> read_logit_dump(const std::string& path);

// Two dumps matched clip-by-clip. Row order follows the first dump; the
// second dump may be arbitrarily shuffled since matching is keyed by clip_id.
struct AlignedDumps {
    std::string task;                   // common task of both dumps
    std::vector<std::string> clip_ids;  // in first-dump order
    Tensor x_logits;                    // (N, n) from the first dump
    Tensor s_logits;                    // (N, n) from the second dump
    std::vector<int> ec_labels;         // task EC: class id per clip
    Tensor mgap_targets;                // task MGAP: (N, L) multi-hot
};

// Pairs records by clip_id and validates that both dumps describe the same
// evaluation: same clip set, same task, same logit width, same labels.
// Throws std::runtime_error ("alignment error: ...") naming the first
// mismatching clip.
AlignedDumps align_dumps(const std::vector<LogitRecord>& x_dump,
                         const std::vector<LogitRecord>& s_dump);

// Metrics of one weighted fusion of two aligned dumps. Exactly one of the
// two reports is meaningful, selected by `task`.
struct EnsembleResult {
    EnsembleWeights weights;
    std::string name;  // weights.label(), e.g. "50/50"
    std::string task;  // "EC" or "MGAP"
    metrics::EcReport ec;
    metrics::MgapReport mgap;
};

// Fuses the dumps with one weight pair and scores the result. EC dumps are
// scored on the fused logits directly; MGAP dumps are scored on
// sigmoid(V) = 1/(1+exp(-V)), evaluated in double precision per element.
EnsembleResult evaluate_ensemble(const std::vector<LogitRecord>& x_dump,
                                 const std::vector<LogitRecord>& s_dump,
                                 const EnsembleWeights& w);

// Runs evaluate_ensemble once per grid entry (default: 75/25, 50/50, 25/75).
std::vector<EnsembleResult> sweep(const std::vector<LogitRecord>& x_dump,
                                  const std::vector<LogitRecord>& s_dump,
                                  const std::vector<EnsembleWeights>& grid =
                                      default_weight_grid());

}  // namespace exnet::ensemble
