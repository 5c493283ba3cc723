#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "exnet/nn/layer.hpp"

namespace exnet::models {

using nn::BatchNorm3d;
using nn::Buffer;
using nn::Conv3d;
using nn::Parameter;
using nn::ReLU;

// Concatenate along the channel axis; shapes must agree elsewhere.
Tensor concat_channels(const Tensor& a, const Tensor& b);
// Split a channel-concatenated gradient back into the two parts.
std::pair<Tensor, Tensor> split_channels(const Tensor& x, int64_t first_channels);

// Keep every stride-th frame starting at 0: (N,C,T,H,W) -> (N,C,ceil(T/stride),H,W).
Tensor subsample_frames(const Tensor& x, int64_t stride);

// Classic residual bottleneck: 1x1x1 (optionally temporal) -> 3x3 spatial
// (carries stride) -> 1x1x1 expand, plus a projection shortcut when the
// shape changes.
class Bottleneck {
public:
    // kt applies to the first convolution; stride to the spatial convolution.
    Bottleneck(const std::string& name, int64_t in_c, int64_t inner_c, int64_t out_c, int kt,
               int spatial_stride);

    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& dy);
    void collect(std::vector<Parameter*>& params, std::vector<Buffer*>& buffers);
    void init_params(Rng& rng);

    // Per-sample forward cost given the block input; also advances the shape.
    int64_t flops(kernels::Shape5d& shape) const;
    int64_t param_count() const;

private:
    Conv3d conv1_;
    BatchNorm3d bn1_;
    ReLU relu1_;
    Conv3d conv2_;
    BatchNorm3d bn2_;
    ReLU relu2_;
    Conv3d conv3_;
    BatchNorm3d bn3_;
    std::optional<Conv3d> proj_;
    std::optional<BatchNorm3d> proj_bn_;
    ReLU relu_out_;
    bool has_proj_;
};

// X3D-style inverted bottleneck: 1x1x1 expand -> depthwise (kt,3,3) with the
// stage stride -> 1x1x1 reduce; residual with projection when needed.
class InvertedBottleneck {
public:
    InvertedBottleneck(const std::string& name, int64_t in_c, int64_t inner_c, int64_t out_c,
                       int kt, int spatial_stride);

    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& dy);
    void collect(std::vector<Parameter*>& params, std::vector<Buffer*>& buffers);
    void init_params(Rng& rng);
    int64_t flops(kernels::Shape5d& shape) const;
    int64_t param_count() const;

private:
    Conv3d conv1_;
    BatchNorm3d bn1_;
    ReLU relu1_;
    Conv3d conv2_;  // depthwise
    BatchNorm3d bn2_;
    ReLU relu2_;
    Conv3d conv3_;
    BatchNorm3d bn3_;
    std::optional<Conv3d> proj_;
    std::optional<BatchNorm3d> proj_bn_;
    ReLU relu_out_;
    bool has_proj_;
};

}  // namespace exnet::models
