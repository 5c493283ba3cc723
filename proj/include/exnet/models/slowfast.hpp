#pragma once

#include <memory>
#include <string>
#include <vector>

#include "exnet/models/blocks.hpp"
#include "exnet/nn/network.hpp"

namespace exnet::models {

struct SlowFastConfig {
    int depth = 50;  // 50 or 101
    int64_t num_classes = 16;
    std::string head = "multiclass";
    int64_t frames = 32;  // raw clip frames fed to the network
    int64_t tau = 2;      // slow-path frame stride
    int64_t alpha = 4;    // target fast/slow frame-rate ratio
    int64_t inverse_beta = 8;  // fast channels = round(width / inverse_beta)
    int64_t height = 256;
    int64_t width = 256;
    int64_t in_channels = 3;

    static SlowFastConfig from_json(int depth, const nlohmann::json& overrides);
};

// Two-pathway residual video network. The slow pathway sees every tau-th
// frame at full width; the fast pathway sees a denser frame stream at a
// fraction of the width, and feeds the slow pathway through five
// time-strided lateral convolutions: after the stem pool and after each of
// the four residual stages. Classification reads the concatenated global
// averages of both pathways.
class SlowFast final : public nn::Network {
public:
    explicit SlowFast(const SlowFastConfig& cfg);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dlogits) override;

    std::vector<Parameter*> parameters() override;
    std::vector<Buffer*> buffers() override;

    std::string arch_name() const override;
    nlohmann::json config_json() const override;
    int64_t num_classes() const override { return cfg_.num_classes; }
    const std::string& head_kind() const override { return cfg_.head; }
    void replace_head(int64_t new_classes, const std::string& head_kind, Rng& rng) override;
    kernels::Shape5d input_shape() const override;
    int64_t flops() const override;
    int64_t param_count() const override;
    void init_params(Rng& rng) override;

    // Derived layout facts, exposed for structural tests.
    int64_t slow_frames() const { return slow_t_; }
    int64_t fast_frames() const { return fast_t_; }
    int64_t lateral_stride() const { return lateral_stride_; }
    int64_t fast_width(int64_t slow_width) const;
    int64_t head_in_features() const { return head_in_; }
    // Temporal length of each of the five lateral outputs for this config.
    std::vector<int64_t> lateral_output_frames() const;

private:
    struct Pathway {
        std::unique_ptr<Conv3d> stem_conv;
        std::unique_ptr<BatchNorm3d> stem_bn;
        ReLU stem_relu;
        std::unique_ptr<nn::MaxPool3d> stem_pool;
        std::vector<std::vector<Bottleneck>> stages;
    };
    struct Lateral {
        std::unique_ptr<Conv3d> conv;
        std::unique_ptr<BatchNorm3d> bn;
        ReLU relu;
    };

    Tensor run_lateral(int i, const Tensor& fast_feature, bool training);
    Tensor lateral_backward(int i, const Tensor& dy);
    static Tensor stage_forward(std::vector<Bottleneck>& stage, Tensor x, bool training);
    static Tensor stage_backward(std::vector<Bottleneck>& stage, Tensor dy);

    SlowFastConfig cfg_;
    int64_t slow_t_ = 0, fast_t_ = 0, fast_stride_ = 1, lateral_stride_ = 1;
    int64_t head_in_ = 0;
    std::vector<int64_t> stage_out_;    // slow widths out of each stage
    std::vector<int64_t> stage_inner_;  // slow bottleneck widths
    std::vector<int> stage_blocks_;

    Pathway slow_;
    Pathway fast_;
    Lateral laterals_[5];
    nn::GlobalAvgPool gap_slow_;
    nn::GlobalAvgPool gap_fast_;
    std::unique_ptr<nn::Linear> fc_;
    int64_t slow_gap_c_ = 0;  // channels entering the slow global pool
};

}  // namespace exnet::models
