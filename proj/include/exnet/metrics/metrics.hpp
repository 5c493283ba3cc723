#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "exnet/core/tensor.hpp"

namespace exnet::metrics {

// All values are percentages in [0, 100].
struct EcReport {
    double top1 = 0.0;
    double top5 = 0.0;
    double auc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int64_t n_samples = 0;
    std::vector<int> degenerate_auc_classes;  // skipped: no positives or no negatives
    std::vector<int> absent_classes;          // zero-contribution in P/R/F1

    nlohmann::json to_json() const;
    static EcReport from_json(const nlohmann::json& j);
    // Columns: Top 1 (%), Top 5 (%), AUC (%), Prec (%), Recall (%), F1 (%).
    static std::string table_header_markdown();
    static std::string table_header_csv();
    std::string table_row_markdown(const std::string& name) const;
    std::string table_row_csv(const std::string& name) const;
};

struct MgapReport {
    double accuracy = 0.0;
    double auc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int64_t n_samples = 0;
    double threshold = 0.5;
    std::vector<int> degenerate_auc_labels;
    std::vector<int> absent_labels;

    nlohmann::json to_json() const;
    static MgapReport from_json(const nlohmann::json& j);
    // Columns: Accuracy (%), AUC (%), Prec (%), Recall (%), F1 (%).
    static std::string table_header_markdown();
    static std::string table_header_csv();
    std::string table_row_markdown(const std::string& name) const;
    std::string table_row_csv(const std::string& name) const;
};

// Fraction (x100) of samples whose label ranks among the k largest logits;
// equal logits rank by ascending class index. `logits` is (N, C), labels in
// [0, C). Throws on an empty set or k outside [1, C].
double top_k_accuracy(const Tensor& logits, const std::vector<int>& labels, int k);

// Macro one-vs-rest rank AUROC (x100) over columns of `scores` (N, C) against
// multi-hot `targets` (N, C); tied scores contribute 0.5. Columns lacking a
// positive or a negative are skipped with a warning and reported through
// `degenerate` when given; all columns degenerate is an error.
double auroc_macro(const Tensor& scores, const Tensor& targets,
                   std::vector<int>* degenerate = nullptr);

// Macro precision/recall/F1 (x100 each) from the argmax confusion matrix.
// Classes with no predictions and no labels contribute zeros and are listed
// through `absent` when given.
std::tuple<double, double, double> multiclass_prf(const Tensor& logits,
                                                  const std::vector<int>& labels,
                                                  std::vector<int>* absent = nullptr);

// Complete report for 16-way exercise classification from raw logits.
EcReport multiclass_metrics(const Tensor& logits, const std::vector<int>& labels);

// Complete report for multilabel muscle-group prediction. `probabilities` and
// `targets` are (N, L) with probabilities in [0, 1] and targets in {0, 1}.
// Accuracy is per-cell at `threshold`; P/R/F1 and AUC are macro over labels.
MgapReport multilabel_metrics(const Tensor& probabilities, const Tensor& targets,
                              double threshold = 0.5);

}  // namespace exnet::metrics
