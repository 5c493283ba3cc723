#include "exnet/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace exnet::nn {

double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* dlogits) {
    if (logits.ndim() != 2) throw std::invalid_argument("logits must be (N,K)");
    const int64_t n = logits.dim(0), k = logits.dim(1);
    if (int64_t(labels.size()) != n)
        throw std::invalid_argument("got " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(n) + " rows");
    if (dlogits && !dlogits->same_shape(logits)) *dlogits = Tensor::zeros(logits.shape());

    double total = 0.0;
    std::vector<double> p(static_cast<size_t>(k));
    for (int64_t i = 0; i < n; ++i) {
        const int label = labels[static_cast<size_t>(i)];
        if (label < 0 || label >= k)
            throw std::invalid_argument("label " + std::to_string(label) + " out of range [0," +
                                        std::to_string(k) + ")");
        const float* row = logits.data() + i * k;
        double mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, double(row[j]));
        double denom = 0.0;
        for (int64_t j = 0; j < k; ++j) {
            p[static_cast<size_t>(j)] = std::exp(double(row[j]) - mx);
            denom += p[static_cast<size_t>(j)];
        }
        total += -(double(row[label]) - mx - std::log(denom));
        if (dlogits) {
            float* drow = dlogits->data() + i * k;
            for (int64_t j = 0; j < k; ++j) {
                const double prob = p[static_cast<size_t>(j)] / denom;
                drow[j] = float((prob - (j == label ? 1.0 : 0.0)) / double(n));
            }
        }
    }
    return total / double(n);
}

Tensor softmax(const Tensor& logits) {
    if (logits.ndim() != 2) throw std::invalid_argument("logits must be (N,K)");
    const int64_t n = logits.dim(0), k = logits.dim(1);
    Tensor out = Tensor::zeros(logits.shape());
    for (int64_t i = 0; i < n; ++i) {
        const float* row = logits.data() + i * k;
        float* orow = out.data() + i * k;
        double mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, double(row[j]));
        double denom = 0.0;
        for (int64_t j = 0; j < k; ++j) denom += std::exp(double(row[j]) - mx);
        for (int64_t j = 0; j < k; ++j)
            orow[j] = float(std::exp(double(row[j]) - mx) / denom);
    }
    return out;
}

double bce_with_logits(const Tensor& logits, const Tensor& targets, Tensor* dlogits) {
    if (!logits.same_shape(targets))
        throw std::invalid_argument("logits " + logits.shape_str() + " vs targets " +
                                    targets.shape_str());
    const int64_t total = logits.numel();
    if (total == 0) throw std::invalid_argument("empty logits");
    if (dlogits && !dlogits->same_shape(logits)) *dlogits = Tensor::zeros(logits.shape());

    double loss = 0.0;
    for (int64_t i = 0; i < total; ++i) {
        const double z = logits[i], y = targets[i];
        // max(z,0) - z*y + log(1 + exp(-|z|)) is exact and overflow-free.
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        if (dlogits) {
            const double sig = 1.0 / (1.0 + std::exp(-z));
            (*dlogits)[i] = float((sig - y) / double(total));
        }
    }
    return loss / double(total);
}

Tensor sigmoid(const Tensor& logits) {
    Tensor out = Tensor::zeros(logits.shape());
    for (int64_t i = 0; i < logits.numel(); ++i)
        out[i] = float(1.0 / (1.0 + std::exp(-double(logits[i]))));
    return out;
}

}  // namespace exnet::nn
