#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "exnet/models/blocks.hpp"
#include "exnet/nn/network.hpp"

namespace exnet::models {

// Multiplicative expansion factors applied to the 2-D image baseline. All
// ones reproduces the baseline exactly.
//   gamma_T: sampling-rate factor (frame interval = base / gamma_T). Pure
//            data-pipeline metadata: it never changes layer shapes or cost.
//   gamma_t: frames per clip.
//   gamma_s: spatial resolution.
//   gamma_w: global channel width.
//   gamma_b: bottleneck (inner) width, including the pre-head conv.
//   gamma_d: blocks per stage.
struct ExpandFactors {
    double gamma_T = 1.0;
    double gamma_t = 1.0;
    double gamma_s = 1.0;
    double gamma_w = 1.0;
    double gamma_b = 1.0;
    double gamma_d = 1.0;

    nlohmann::json to_json() const;
    static ExpandFactors from_json(const nlohmann::json& j);
    bool all_ones() const;
};

struct X3DConfig {
    ExpandFactors factors;
    int64_t num_classes = 16;
    std::string head = "multiclass";
    int64_t in_channels = 3;
    int64_t base_spatial = 160;
    std::string name = "x3d";  // arch label: x3d, x3d_s, x3d_m

    static X3DConfig from_json(const std::string& arch, const nlohmann::json& overrides);
};

// Derived integer layout for a factor setting (shared by the 3-D network and
// the 2-D baseline analyzer; both round the same way).
struct X3DLayout {
    int64_t frames;                    // max(1, round(gamma_t))
    int64_t spatial;                   // round(base_spatial * gamma_s)
    int temporal_kernel;               // 3 when frames > 1, else 1
    std::vector<int64_t> widths;       // per-stage output channels
    std::vector<int64_t> inner;        // per-stage bottleneck channels
    std::vector<int64_t> depths;       // blocks per stage
    int64_t head_inner;                // pre-head conv output channels

    static X3DLayout derive(const ExpandFactors& f, int64_t base_spatial);
};

// Cost/shape summary of the 2-D baseline network (single frame, purely 2-D
// convolutions), computed with independent 2-D arithmetic. Used to pin down
// the all-ones behavior of the 3-D network.
struct X2dReference {
    int64_t flops = 0;
    int64_t params = 0;
    // (c,h,w) after the stem, after each stage, and after the pre-head conv.
    std::vector<std::array<int64_t, 3>> shapes;
};
X2dReference x2d_reference(int64_t num_classes, const ExpandFactors& f, int64_t base_spatial,
                           int64_t in_channels);

// Progressive-expansion video network built from inverted bottlenecks with
// depthwise spatio-temporal convolutions.
class X3D final : public nn::Network {
public:
    explicit X3D(const X3DConfig& cfg);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dlogits) override;
    std::vector<Parameter*> parameters() override;
    std::vector<Buffer*> buffers() override;
    std::string arch_name() const override { return cfg_.name; }
    nlohmann::json config_json() const override;
    int64_t num_classes() const override { return cfg_.num_classes; }
    const std::string& head_kind() const override { return cfg_.head; }
    void replace_head(int64_t new_classes, const std::string& head_kind, Rng& rng) override;
    kernels::Shape5d input_shape() const override;
    int64_t flops() const override;
    int64_t param_count() const override;
    void init_params(Rng& rng) override;

    const ExpandFactors& factors() const { return cfg_.factors; }
    const X3DLayout& layout() const { return layout_; }
    // (c,t,h,w) after the stem, each stage, and the pre-head conv.
    std::vector<std::array<int64_t, 4>> stage_shapes() const;

private:
    X3DConfig cfg_;
    X3DLayout layout_;

    std::unique_ptr<Conv3d> stem_conv_;
    std::unique_ptr<BatchNorm3d> stem_bn_;
    ReLU stem_relu_;
    std::vector<std::vector<InvertedBottleneck>> stages_;
    std::unique_ptr<Conv3d> head_conv_;
    std::unique_ptr<BatchNorm3d> head_bn_;
    ReLU head_relu_;
    nn::GlobalAvgPool gap_;
    std::unique_ptr<nn::Linear> fc_;
};

// Factor settings for the two published preset sizes.
ExpandFactors x3d_preset_factors(const std::string& name);

// FLOPs of the network X3D(cfg) would build, computed from shape arithmetic
// alone — no parameter allocation. Matches X3D(cfg).flops() exactly; used by
// the expansion search, which probes many factor settings per step.
int64_t x3d_flops(const X3DConfig& cfg);

}  // namespace exnet::models
