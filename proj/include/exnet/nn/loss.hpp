#pragma once

#include <cstdint>
#include <vector>

#include "exnet/core/tensor.hpp"

namespace exnet::nn {

// Mean softmax cross-entropy over the batch. logits: (N,K); labels: N class
// ids. If dlogits is non-null it receives d(loss)/d(logits), same shape.
double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* dlogits);

// Row-wise softmax probabilities, numerically stabilized.
Tensor softmax(const Tensor& logits);

// Mean binary cross-entropy with logits over all N*K cells. targets: (N,K)
// with values in [0,1].
double bce_with_logits(const Tensor& logits, const Tensor& targets, Tensor* dlogits);

// Element-wise logistic sigmoid.
Tensor sigmoid(const Tensor& logits);

}  // namespace exnet::nn
