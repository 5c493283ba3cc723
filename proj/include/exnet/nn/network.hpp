#pragma once

#include <memory>
#include <string>
#include <vector>

#include "exnet/core/rng.hpp"
#include "exnet/core/tensor.hpp"
#include "exnet/nn/layer.hpp"
#include "json.hpp"

namespace exnet::nn {

// A trainable video network. Inputs are (N, C, T, H, W) clips; forward
// returns (N, num_classes) logits. backward consumes d(loss)/d(logits) and
// accumulates gradients on every parameter.
class Network {
public:
    virtual ~Network() = default;

    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& dlogits) = 0;

    virtual std::vector<Parameter*> parameters() = 0;
    virtual std::vector<Buffer*> buffers() = 0;

    virtual std::string arch_name() const = 0;
    // Everything needed to rebuild this network via build_network().
    virtual nlohmann::json config_json() const = 0;

    virtual int64_t num_classes() const = 0;
    // "multiclass" (softmax head) or "multilabel" (per-class sigmoid head).
    virtual const std::string& head_kind() const = 0;
    // Swap the classifier for a freshly initialized one; the trunk is untouched.
    virtual void replace_head(int64_t new_classes, const std::string& head_kind, Rng& rng) = 0;

    // Expected per-clip input (n is ignored).
    virtual kernels::Shape5d input_shape() const = 0;

    // Forward cost for one clip: convolutions and the fully connected head
    // count 2 * outputs * inputs-per-output; normalization and pooling are
    // excluded.
    virtual int64_t flops() const = 0;
    virtual int64_t param_count() const = 0;

    virtual void init_params(Rng& rng) = 0;
};

// Builds one of the registered architectures. "config" may override the
// architecture defaults (input size, class count, head kind, ...).
// Known archs: slowfast_r50, slowfast_r101, x3d, x3d_s, x3d_m.
std::unique_ptr<Network> build_network(const std::string& arch, const nlohmann::json& config);

std::vector<std::string> registered_archs();

}  // namespace exnet::nn
