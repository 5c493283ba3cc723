#include "exnet/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "exnet/core/log.hpp"

namespace exnet::metrics {
namespace {

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void require_2d(const Tensor& t, const char* what) {
    if (t.ndim() != 2) throw std::invalid_argument(std::string(what) + " must be a (N, C) tensor");
    if (t.dim(0) == 0)
        throw std::invalid_argument(std::string("undefined metric: ") + what + " set is empty");
    if (t.dim(1) == 0)
        throw std::invalid_argument(std::string(what) + " has zero columns");
}

void require_labels(const Tensor& logits, const std::vector<int>& labels) {
    if (int64_t(labels.size()) != logits.dim(0))
        throw std::invalid_argument("label count does not match sample count");
    for (int v : labels)
        if (v < 0 || int64_t(v) >= logits.dim(1))
            throw std::invalid_argument("label " + std::to_string(v) + " outside [0, " +
                                        std::to_string(logits.dim(1)) + ")");
}

// Rank of `cls` among the row's logits: number of classes that would be
// listed before it when sorting by (logit desc, class index asc).
int64_t rank_of(const float* row, int64_t c, int64_t cls) {
    int64_t rank = 0;
    for (int64_t j = 0; j < c; ++j) {
        if (j == cls) continue;
        if (row[j] > row[cls] || (row[j] == row[cls] && j < cls)) ++rank;
    }
    return rank;
}

int64_t argmax_first(const float* row, int64_t c) {
    int64_t best = 0;
    for (int64_t j = 1; j < c; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Macro P/R/F1 over per-class true/false positive/negative tallies. Classes
// with no activity on either side contribute zeros and are flagged.
Prf macro_prf(const std::vector<int64_t>& tp, const std::vector<int64_t>& fp,
              const std::vector<int64_t>& fn, std::vector<int>* absent) {
    const size_t c = tp.size();
    Prf out;
    for (size_t k = 0; k < c; ++k) {
        if (tp[k] + fp[k] + fn[k] == 0) {
            if (absent) absent->push_back(int(k));
            continue;  // contributes 0 to every sum
        }
        const double p = tp[k] + fp[k] > 0 ? double(tp[k]) / double(tp[k] + fp[k]) : 0.0;
        const double r = tp[k] + fn[k] > 0 ? double(tp[k]) / double(tp[k] + fn[k]) : 0.0;
        out.precision += p;
        out.recall += r;
        out.f1 += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    out.precision *= 100.0 / double(c);
    out.recall *= 100.0 / double(c);
    out.f1 *= 100.0 / double(c);
    return out;
}

nlohmann::json int_array(const std::vector<int>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int x : v) a.push_back(x);
    return a;
}

}  // namespace

double top_k_accuracy(const Tensor& logits, const std::vector<int>& labels, int k) {
    require_2d(logits, "logits");
    require_labels(logits, labels);
    const int64_t n = logits.dim(0), c = logits.dim(1);
    if (k < 1 || int64_t(k) > c)
        throw std::invalid_argument("top-k with k=" + std::to_string(k) + " needs 1 <= k <= " +
                                    std::to_string(c));
    int64_t hits = 0;
    for (int64_t i = 0; i < n; ++i)
        if (rank_of(logits.data() + i * c, c, labels[size_t(i)]) < int64_t(k)) ++hits;
    return 100.0 * double(hits) / double(n);
}

double auroc_macro(const Tensor& scores, const Tensor& targets, std::vector<int>* degenerate) {
    require_2d(scores, "scores");
    if (!scores.same_shape(targets))
        throw std::invalid_argument("scores shape " + scores.shape_str() +
                                    " does not match targets shape " + targets.shape_str());
    const int64_t n = scores.dim(0), c = scores.dim(1);

    double sum = 0.0;
    int64_t included = 0;
    std::vector<int> skipped;
    std::vector<std::pair<float, bool>> column(static_cast<size_t>(n));
    for (int64_t j = 0; j < c; ++j) {
        int64_t positives = 0;
        for (int64_t i = 0; i < n; ++i) {
            const float t = targets[i * c + j];
            if (t != 0.0f && t != 1.0f)
                throw std::invalid_argument("targets must be 0/1 multi-hot");
            column[size_t(i)] = {scores[i * c + j], t == 1.0f};
            if (t == 1.0f) ++positives;
        }
        const int64_t negatives = n - positives;
        if (positives == 0 || negatives == 0) {
            skipped.push_back(int(j));
            continue;
        }

        // Mann-Whitney U via average ranks; tied scores share their rank, so
        // each tied positive/negative pair contributes exactly 0.5.
        std::sort(column.begin(), column.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double rank_sum_pos = 0.0;
        size_t i = 0;
        while (i < column.size()) {
            size_t j2 = i;
            while (j2 + 1 < column.size() && column[j2 + 1].first == column[i].first) ++j2;
            const double avg_rank = 0.5 * double(i + 1 + j2 + 1);  // 1-based average
            for (size_t t = i; t <= j2; ++t)
                if (column[t].second) rank_sum_pos += avg_rank;
            i = j2 + 1;
        }
        const double u = rank_sum_pos - 0.5 * double(positives) * double(positives + 1);
        sum += u / (double(positives) * double(negatives));
        ++included;
    }

    if (included == 0)
        throw std::runtime_error(
            "undefined metric: every class lacks a positive or a negative sample");
    if (!skipped.empty()) {
        std::string list;
        for (size_t k = 0; k < skipped.size(); ++k)
            list += (k ? ", " : "") + std::to_string(skipped[k]);
        log_warning("AUROC skipped " + std::to_string(skipped.size()) +
                    " class(es) without both positives and negatives: " + list);
    }
    if (degenerate) *degenerate = std::move(skipped);
    return 100.0 * sum / double(included);
}

std::tuple<double, double, double> multiclass_prf(const Tensor& logits,
                                                  const std::vector<int>& labels,
                                                  std::vector<int>* absent) {
    require_2d(logits, "logits");
    require_labels(logits, labels);
    const int64_t n = logits.dim(0), c = logits.dim(1);
    std::vector<int64_t> tp(size_t(c), 0), fp(size_t(c), 0), fn(size_t(c), 0);
    for (int64_t i = 0; i < n; ++i) {
        const int64_t pred = argmax_first(logits.data() + i * c, c);
        const int64_t truth = labels[size_t(i)];
        if (pred == truth) {
            ++tp[size_t(pred)];
        } else {
            ++fp[size_t(pred)];
            ++fn[size_t(truth)];
        }
    }
    const Prf prf = macro_prf(tp, fp, fn, absent);
    return {prf.precision, prf.recall, prf.f1};
}

EcReport multiclass_metrics(const Tensor& logits, const std::vector<int>& labels) {
    require_2d(logits, "logits");
    require_labels(logits, labels);
    const int64_t n = logits.dim(0), c = logits.dim(1);

    EcReport report;
    report.n_samples = n;
    report.top1 = top_k_accuracy(logits, labels, 1);
    report.top5 = top_k_accuracy(logits, labels, int(std::min<int64_t>(5, c)));

    // AUROC over softmax probabilities against one-hot targets. The softmax
    // is monotone per row, but compute it anyway so reported scores are the
    // activations the contract names.
    Tensor probs({n, c});
    for (int64_t i = 0; i < n; ++i) {
        const float* row = logits.data() + i * c;
        float mx = row[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int64_t j = 0; j < c; ++j) denom += std::exp(double(row[j]) - mx);
        for (int64_t j = 0; j < c; ++j)
            probs[i * c + j] = float(std::exp(double(row[j]) - mx) / denom);
    }
    Tensor onehot({n, c});
    for (int64_t i = 0; i < n; ++i) onehot[i * c + labels[size_t(i)]] = 1.0f;
    report.auc = auroc_macro(probs, onehot, &report.degenerate_auc_classes);

    std::tie(report.precision, report.recall, report.f1) =
        multiclass_prf(logits, labels, &report.absent_classes);
    return report;
}

MgapReport multilabel_metrics(const Tensor& probabilities, const Tensor& targets,
                              double threshold) {
    require_2d(probabilities, "probabilities");
    if (!probabilities.same_shape(targets))
        throw std::invalid_argument("probabilities shape " + probabilities.shape_str() +
                                    " does not match targets shape " + targets.shape_str());
    const int64_t n = probabilities.dim(0), l = probabilities.dim(1);
    for (int64_t i = 0; i < n * l; ++i)
        if (probabilities[i] < 0.0f || probabilities[i] > 1.0f)
            throw std::invalid_argument("probabilities must lie in [0, 1]");

    MgapReport report;
    report.n_samples = n;
    report.threshold = threshold;

    int64_t correct_cells = 0;
    std::vector<int64_t> tp(size_t(l), 0), fp(size_t(l), 0), fn(size_t(l), 0);
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < l; ++j) {
            const float t = targets[i * l + j];
            if (t != 0.0f && t != 1.0f)
                throw std::invalid_argument("targets must be 0/1 multi-hot");
            const bool predicted = double(probabilities[i * l + j]) >= threshold;
            const bool positive = t == 1.0f;
            if (predicted == positive) ++correct_cells;
            if (predicted && positive)
                ++tp[size_t(j)];
            else if (predicted && !positive)
                ++fp[size_t(j)];
            else if (!predicted && positive)
                ++fn[size_t(j)];
        }
    }
    report.accuracy = 100.0 * double(correct_cells) / double(n * l);

    const Prf prf = macro_prf(tp, fp, fn, &report.absent_labels);
    report.precision = prf.precision;
    report.recall = prf.recall;
    report.f1 = prf.f1;
    report.auc = auroc_macro(probabilities, targets, &report.degenerate_auc_labels);
    return report;
}

nlohmann::json EcReport::to_json() const {
    return {{"task", "EC"},           {"top1", top1},
            {"top5", top5},           {"auc", auc},
            {"precision", precision}, {"recall", recall},
            {"f1", f1},               {"n_samples", n_samples},
            {"degenerate_auc_classes", int_array(degenerate_auc_classes)},
            {"absent_classes", int_array(absent_classes)}};
}

EcReport EcReport::from_json(const nlohmann::json& j) {
    if (j.value("task", "") != "EC")
        throw std::invalid_argument("metrics JSON is not an EC report");
    EcReport r;
    r.top1 = j.at("top1").get<double>();
    r.top5 = j.at("top5").get<double>();
    r.auc = j.at("auc").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.n_samples = j.value("n_samples", int64_t(0));
    for (const auto& v : j.value("degenerate_auc_classes", nlohmann::json::array()))
        r.degenerate_auc_classes.push_back(v.get<int>());
    for (const auto& v : j.value("absent_classes", nlohmann::json::array()))
        r.absent_classes.push_back(v.get<int>());
    return r;
}

std::string EcReport::table_header_markdown() {
    return "| Model | Top 1 (%) | Top 5 (%) | AUC (%) | Prec (%) | Recall (%) | F1 (%) |\n"
           "|---|---|---|---|---|---|---|";
}

std::string EcReport::table_header_csv() {
    return "model,top1,top5,auc,precision,recall,f1";
}

std::string EcReport::table_row_markdown(const std::string& name) const {
    return "| " + name + " | " + fmt2(top1) + " | " + fmt2(top5) + " | " + fmt2(auc) + " | " +
           fmt2(precision) + " | " + fmt2(recall) + " | " + fmt2(f1) + " |";
}

std::string EcReport::table_row_csv(const std::string& name) const {
    return name + "," + fmt2(top1) + "," + fmt2(top5) + "," + fmt2(auc) + "," + fmt2(precision) +
           "," + fmt2(recall) + "," + fmt2(f1);
}

nlohmann::json MgapReport::to_json() const {
    return {{"task", "MGAP"},         {"accuracy", accuracy},
            {"auc", auc},             {"precision", precision},
            {"recall", recall},       {"f1", f1},
            {"n_samples", n_samples}, {"threshold", threshold},
            {"degenerate_auc_labels", int_array(degenerate_auc_labels)},
            {"absent_labels", int_array(absent_labels)}};
}

MgapReport MgapReport::from_json(const nlohmann::json& j) {
    if (j.value("task", "") != "MGAP")
        throw std::invalid_argument("metrics JSON is not an MGAP report");
    MgapReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.auc = j.at("auc").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.n_samples = j.value("n_samples", int64_t(0));
    r.threshold = j.value("threshold", 0.5);
    for (const auto& v : j.value("degenerate_auc_labels", nlohmann::json::array()))
        r.degenerate_auc_labels.push_back(v.get<int>());
    for (const auto& v : j.value("absent_labels", nlohmann::json::array()))
        r.absent_labels.push_back(v.get<int>());
    return r;
}

std::string MgapReport::table_header_markdown() {
    return "| Model | Accuracy (%) | AUC (%) | Prec (%) | Recall (%) | F1 (%) |\n"
           "|---|---|---|---|---|---|";
}

std::string MgapReport::table_header_csv() {
    return "model,accuracy,auc,precision,recall,f1";
}

std::string MgapReport::table_row_markdown(const std::string& name) const {
    return "| " + name + " | " + fmt2(accuracy) + " | " + fmt2(auc) + " | " + fmt2(precision) +
           " | " + fmt2(recall) + " | " + fmt2(f1) + " |";
}

std::string MgapReport::table_row_csv(const std::string& name) const {
    return name + "," + fmt2(accuracy) + "," + fmt2(auc) + "," + fmt2(precision) + "," +
           fmt2(recall) + "," + fmt2(f1);
}

}  // namespace exnet::metrics
