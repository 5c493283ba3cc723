#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "exnet/core/kernels.hpp"
#include "exnet/core/rng.hpp"
#include "exnet/core/tensor.hpp"

namespace exnet::nn {

// A learnable tensor with its gradient and (lazily sized) Adam state.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;

    explicit Parameter(std::string n = "", Tensor v = Tensor())
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

    void zero_grad() { grad.fill(0.0f); }
};

// A non-learnable persistent tensor (batch-norm running stats).
struct Buffer {
    std::string name;
    Tensor value;
};

kernels::Shape5d to_shape5d(const Tensor& t);

// Layers cache whatever forward state their backward needs. backward() takes
// the gradient w.r.t. the layer output and returns the gradient w.r.t. the
// layer input, accumulating parameter gradients as a side effect.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual std::vector<Parameter*> params() { return {}; }
    virtual std::vector<Buffer*> buffers() { return {}; }
};

class Conv3d final : public Layer {
public:
    // No bias term: these convolutions are always followed by a batch norm.
    Conv3d(std::string name, kernels::Conv3dSpec spec);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Parameter*> params() override { return {&weight_}; }

    void init_he(Rng& rng);
    const kernels::Conv3dSpec& spec() const { return spec_; }
    // FLOPs for one sample with the given input shape (multiply + add).
    int64_t flops(const kernels::Shape5d& in) const;
    int64_t param_count() const { return weight_.value.numel(); }

private:
    kernels::Conv3dSpec spec_;
    Parameter weight_;
    Tensor cached_x_;
};

class BatchNorm3d final : public Layer {
public:
    BatchNorm3d(std::string name, int64_t channels, float eps = 1e-5f, float momentum = 0.1f);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Parameter*> params() override { return {&gamma_, &beta_}; }
    std::vector<Buffer*> buffers() override { return {&running_mean_, &running_var_}; }

    int64_t channels() const { return channels_; }

private:
    int64_t channels_;
    float eps_;
    float momentum_;
    Parameter gamma_;
    Parameter beta_;
    Buffer running_mean_;
    Buffer running_var_;
    Tensor cached_x_;
    Tensor batch_mean_;
    Tensor batch_var_;
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;

private:
    Tensor cached_y_;
};

class MaxPool3d final : public Layer {
public:
    MaxPool3d(int kt, int kh, int kw, int st, int sh, int sw, int pt, int ph, int pw);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;

private:
    int kt_, kh_, kw_, st_, sh_, sw_, pt_, ph_, pw_;
    kernels::Shape5d in_shape_{};
    kernels::Shape5d out_shape_{};
    std::vector<int64_t> argmax_;
};

// (N,C,T,H,W) -> (N,C)
class GlobalAvgPool final : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;

private:
    kernels::Shape5d in_shape_{};
};

// (N,in) -> (N,out), with bias.
class Linear final : public Layer {
public:
    Linear(std::string name, int64_t in_features, int64_t out_features);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    std::vector<Parameter*> params() override { return {&weight_, &bias_}; }

    void init_he(Rng& rng);
    int64_t in_features() const { return in_; }
    int64_t out_features() const { return out_; }
    int64_t flops() const { return 2 * in_ * out_; }
    int64_t param_count() const { return weight_.value.numel() + bias_.value.numel(); }

private:
    int64_t in_;
    int64_t out_;
    Parameter weight_;  // (out, in)
    Parameter bias_;    // (out)
    Tensor cached_x_;
};

}  // namespace exnet::nn
