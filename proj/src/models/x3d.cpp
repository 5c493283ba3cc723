#include "exnet/models/x3d.hpp"

#include <cmath>
#include <stdexcept>

namespace exnet::models {

namespace {

constexpr int64_t kBaseWidths[4] = {24, 48, 96, 192};
constexpr int64_t kBaseDepths[4] = {1, 2, 5, 3};

kernels::Conv3dSpec spec(int64_t in_c, int64_t out_c, int kt, int kh, int kw, int st, int sh,
                         int sw, int64_t groups = 1) {
    kernels::Conv3dSpec s;
    s.in_c = in_c;
    s.out_c = out_c;
    s.kt = kt;
    s.kh = kh;
    s.kw = kw;
    s.st = st;
    s.sh = sh;
    s.sw = sw;
    s.pt = (kt - 1) / 2;
    s.ph = (kh - 1) / 2;
    s.pw = (kw - 1) / 2;
    s.groups = groups;
    return s;
}

}  // namespace

nlohmann::json ExpandFactors::to_json() const {
    return {{"gamma_T", gamma_T}, {"gamma_t", gamma_t}, {"gamma_s", gamma_s},
            {"gamma_w", gamma_w}, {"gamma_b", gamma_b}, {"gamma_d", gamma_d}};
}

ExpandFactors ExpandFactors::from_json(const nlohmann::json& j) {
    ExpandFactors f;
    f.gamma_T = j.value("gamma_T", 1.0);
    f.gamma_t = j.value("gamma_t", 1.0);
    f.gamma_s = j.value("gamma_s", 1.0);
    f.gamma_w = j.value("gamma_w", 1.0);
    f.gamma_b = j.value("gamma_b", 1.0);
    f.gamma_d = j.value("gamma_d", 1.0);
    return f;
}

bool ExpandFactors::all_ones() const {
    return gamma_T == 1.0 && gamma_t == 1.0 && gamma_s == 1.0 && gamma_w == 1.0 &&
           gamma_b == 1.0 && gamma_d == 1.0;
}

ExpandFactors x3d_preset_factors(const std::string& name) {
    ExpandFactors f;
    if (name == "x3d_s") {
        f.gamma_T = 6.0;
        f.gamma_t = 13.0;
        f.gamma_s = 1.0;
        f.gamma_w = 1.0;
        f.gamma_b = 2.25;
        f.gamma_d = 2.2;
    } else if (name == "x3d_m") {
        f.gamma_T = 5.0;
        f.gamma_t = 16.0;
        f.gamma_s = 1.4;
        f.gamma_w = 1.0;
        f.gamma_b = 2.25;
        f.gamma_d = 3.0;
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    return f;
}

X3DConfig X3DConfig::from_json(const std::string& arch, const nlohmann::json& overrides) {
    const nlohmann::json ov =
        overrides.is_object() ? overrides : nlohmann::json::object();
    X3DConfig cfg;
    cfg.name = arch;
    if (arch == "x3d_s" || arch == "x3d_m") cfg.factors = x3d_preset_factors(arch);
    if (ov.contains("factors")) cfg.factors = ExpandFactors::from_json(ov.at("factors"));
    cfg.num_classes = ov.value("num_classes", cfg.num_classes);
    cfg.head = ov.value("head", cfg.head);
    cfg.in_channels = ov.value("in_channels", cfg.in_channels);
    cfg.base_spatial = ov.value("base_spatial", cfg.base_spatial);
    return cfg;
}

X3DLayout X3DLayout::derive(const ExpandFactors& f, int64_t base_spatial) {
    if (f.gamma_T < 1.0 || f.gamma_t < 1.0 || f.gamma_s < 1.0 || f.gamma_w < 1.0 ||
        f.gamma_b < 1.0 || f.gamma_d < 1.0)
        throw std::invalid_argument("expansion factors must all be >= 1");
    X3DLayout lay;
    lay.frames = std::max<int64_t>(1, std::llround(f.gamma_t));
    lay.spatial = std::llround(double(base_spatial) * f.gamma_s);
    if (lay.spatial < 16)
        throw std::invalid_argument("spatial size " + std::to_string(lay.spatial) +
                                    " is below the minimum of 16");
    lay.temporal_kernel = lay.frames > 1 ? 3 : 1;
    for (int i = 0; i < 4; ++i) {
        lay.widths.push_back(std::llround(double(kBaseWidths[i]) * f.gamma_w));
        lay.inner.push_back(std::llround(f.gamma_b * double(lay.widths.back())));
        lay.depths.push_back(int64_t(std::ceil(double(kBaseDepths[i]) * f.gamma_d - 1e-9)));
    }
    lay.head_inner = lay.inner[3];
    return lay;
}

X3D::X3D(const X3DConfig& cfg) : cfg_(cfg), layout_(X3DLayout::derive(cfg.factors, cfg.base_spatial)) {
    const int kt = layout_.temporal_kernel;
    stem_conv_ = std::make_unique<Conv3d>(
        "stem.conv.weight", spec(cfg_.in_channels, layout_.widths[0], kt, 3, 3, 1, 2, 2));
    stem_bn_ = std::make_unique<BatchNorm3d>("stem.bn", layout_.widths[0]);

    stages_.resize(4);
    int64_t in_c = layout_.widths[0];
    for (int st = 0; st < 4; ++st) {
        for (int64_t b = 0; b < layout_.depths[size_t(st)]; ++b) {
            const std::string name =
                "res" + std::to_string(st + 1) + ".block" + std::to_string(b);
            stages_[size_t(st)].emplace_back(name, b == 0 ? in_c : layout_.widths[size_t(st)],
                                             layout_.inner[size_t(st)],
                                             layout_.widths[size_t(st)], kt, b == 0 ? 2 : 1);
        }
        in_c = layout_.widths[size_t(st)];
    }

    head_conv_ = std::make_unique<Conv3d>(
        "conv5.weight", spec(layout_.widths[3], layout_.head_inner, 1, 1, 1, 1, 1, 1));
    head_bn_ = std::make_unique<BatchNorm3d>("conv5.bn", layout_.head_inner);
    fc_ = std::make_unique<nn::Linear>("head.fc", layout_.head_inner, cfg_.num_classes);
}

Tensor X3D::forward(const Tensor& x, bool training) {
    const auto xs = nn::to_shape5d(x);
    if (xs.c != cfg_.in_channels || xs.t != layout_.frames)
        throw std::invalid_argument("expected (N," + std::to_string(cfg_.in_channels) + "," +
                                    std::to_string(layout_.frames) + ",H,W), got " +
                                    x.shape_str());
    Tensor h = stem_relu_.forward(
        stem_bn_->forward(stem_conv_->forward(x, training), training), training);
    for (auto& stage : stages_)
        for (auto& block : stage) h = block.forward(h, training);
    h = head_relu_.forward(head_bn_->forward(head_conv_->forward(h, training), training),
                           training);
    return fc_->forward(gap_.forward(h, training), training);
}

Tensor X3D::backward(const Tensor& dlogits) {
    Tensor d = gap_.backward(fc_->backward(dlogits));
    d = head_conv_->backward(head_bn_->backward(head_relu_.backward(d)));
    for (auto st = stages_.rbegin(); st != stages_.rend(); ++st)
        for (auto b = st->rbegin(); b != st->rend(); ++b) d = b->backward(d);
    stem_conv_->backward(stem_bn_->backward(stem_relu_.backward(d)));
    return Tensor();
}

std::vector<Parameter*> X3D::parameters() {
    std::vector<Parameter*> out;
    std::vector<Buffer*> bufs;
    for (auto* p : stem_conv_->params()) out.push_back(p);
    for (auto* p : stem_bn_->params()) out.push_back(p);
    for (auto& stage : stages_)
        for (auto& block : stage) block.collect(out, bufs);
    for (auto* p : head_conv_->params()) out.push_back(p);
    for (auto* p : head_bn_->params()) out.push_back(p);
    for (auto* p : fc_->params()) out.push_back(p);
    return out;
}

std::vector<Buffer*> X3D::buffers() {
    std::vector<Parameter*> params;
    std::vector<Buffer*> out;
    for (auto* b : stem_bn_->buffers()) out.push_back(b);
    for (auto& stage : stages_)
        for (auto& block : stage) block.collect(params, out);
    for (auto* b : head_bn_->buffers()) out.push_back(b);
    return out;
}

nlohmann::json X3D::config_json() const {
    return {{"arch", cfg_.name},
            {"num_classes", cfg_.num_classes},
            {"head", cfg_.head},
            {"in_channels", cfg_.in_channels},
            {"base_spatial", cfg_.base_spatial},
            {"factors", cfg_.factors.to_json()}};
}

void X3D::replace_head(int64_t new_classes, const std::string& head_kind, Rng& rng) {
    cfg_.num_classes = new_classes;
    cfg_.head = head_kind;
    fc_ = std::make_unique<nn::Linear>("head.fc", layout_.head_inner, new_classes);
    fc_->init_he(rng);
}

kernels::Shape5d X3D::input_shape() const {
    return {1, cfg_.in_channels, layout_.frames, layout_.spatial, layout_.spatial};
}

std::vector<std::array<int64_t, 4>> X3D::stage_shapes() const {
    std::vector<std::array<int64_t, 4>> out;
    kernels::Shape5d s = input_shape();
    s = kernels::conv3d_output_shape(stem_conv_->spec(), s);
    out.push_back({s.c, s.t, s.h, s.w});
    for (const auto& stage : stages_) {
        for (const auto& block : stage) {
            kernels::Shape5d tmp = s;
            (void)block.flops(tmp);
            s = tmp;
        }
        out.push_back({s.c, s.t, s.h, s.w});
    }
    s = kernels::conv3d_output_shape(head_conv_->spec(), s);
    out.push_back({s.c, s.t, s.h, s.w});
    return out;
}

int64_t X3D::flops() const {
    int64_t total = 0;
    kernels::Shape5d s = input_shape();
    total += stem_conv_->flops(s);
    s = kernels::conv3d_output_shape(stem_conv_->spec(), s);
    for (const auto& stage : stages_)
        for (const auto& block : stage) total += block.flops(s);
    total += head_conv_->flops(s);
    s = kernels::conv3d_output_shape(head_conv_->spec(), s);
    total += fc_->flops();
    return total;
}

int64_t X3D::param_count() const {
    int64_t total = stem_conv_->param_count() + 2 * stem_bn_->channels();
    for (const auto& stage : stages_)
        for (const auto& block : stage) total += block.param_count();
    total += head_conv_->param_count() + 2 * head_bn_->channels();
    total += fc_->param_count();
    return total;
}

void X3D::init_params(Rng& rng) {
    stem_conv_->init_he(rng);
    for (auto& stage : stages_)
        for (auto& block : stage) block.init_params(rng);
    head_conv_->init_he(rng);
    fc_->init_he(rng);
}

// ---- 2-D baseline analyzer ---------------------------------------------------

namespace {

struct Dim2 {
    int64_t h, w;
};

int64_t conv2d_out(int64_t in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

struct Cost2d {
    int64_t flops = 0;
    int64_t params = 0;
    void conv(int64_t in_c, int64_t out_c, int kh, int kw, int sh, int sw, int ph, int pw,
              int64_t groups, Dim2& d) {
        const int64_t ho = conv2d_out(d.h, kh, sh, ph);
        const int64_t wo = conv2d_out(d.w, kw, sw, pw);
        flops += 2 * out_c * ho * wo * int64_t(kh) * kw * (in_c / groups);
        params += out_c * (in_c / groups) * kh * kw;
        d = {ho, wo};
    }
    void bn(int64_t c) { params += 2 * c; }
    void fc(int64_t in, int64_t out) {
        flops += 2 * in * out;
        params += in * out + out;
    }
};

}  // namespace

X2dReference x2d_reference(int64_t num_classes, const ExpandFactors& f, int64_t base_spatial,
                           int64_t in_channels) {
    // Only the non-temporal factors shape the 2-D baseline.
    X2dReference ref;
    Cost2d cost;
    const int64_t spatial = std::llround(double(base_spatial) * f.gamma_s);
    std::vector<int64_t> widths, inner, depths;
    for (int i = 0; i < 4; ++i) {
        widths.push_back(std::llround(double(kBaseWidths[i]) * f.gamma_w));
        inner.push_back(std::llround(f.gamma_b * double(widths.back())));
        depths.push_back(int64_t(std::ceil(double(kBaseDepths[i]) * f.gamma_d - 1e-9)));
    }

    Dim2 d{spatial, spatial};
    cost.conv(in_channels, widths[0], 3, 3, 2, 2, 1, 1, 1, d);
    cost.bn(widths[0]);
    ref.shapes.push_back({widths[0], d.h, d.w});

    int64_t in_c = widths[0];
    for (int st = 0; st < 4; ++st) {
        for (int64_t b = 0; b < depths[size_t(st)]; ++b) {
            const int64_t block_in = b == 0 ? in_c : widths[size_t(st)];
            const int stride = b == 0 ? 2 : 1;
            const Dim2 d_in = d;
            cost.conv(block_in, inner[size_t(st)], 1, 1, 1, 1, 0, 0, 1, d);
            cost.bn(inner[size_t(st)]);
            cost.conv(inner[size_t(st)], inner[size_t(st)], 3, 3, stride, stride, 1, 1,
                      inner[size_t(st)], d);
            cost.bn(inner[size_t(st)]);
            cost.conv(inner[size_t(st)], widths[size_t(st)], 1, 1, 1, 1, 0, 0, 1, d);
            cost.bn(widths[size_t(st)]);
            if (block_in != widths[size_t(st)] || stride != 1) {
                Dim2 dp = d_in;
                cost.conv(block_in, widths[size_t(st)], 1, 1, stride, stride, 0, 0, 1, dp);
                cost.bn(widths[size_t(st)]);
            }
        }
        in_c = widths[size_t(st)];
        ref.shapes.push_back({in_c, d.h, d.w});
    }

    const int64_t head_inner = inner[3];
    cost.conv(in_c, head_inner, 1, 1, 1, 1, 0, 0, 1, d);
    cost.bn(head_inner);
    ref.shapes.push_back({head_inner, d.h, d.w});
    cost.fc(head_inner, num_classes);

    ref.flops = cost.flops;
    ref.params = cost.params;
    return ref;
}

namespace {

// Walks one convolution of the shape chain, adding its cost.
int64_t conv_cost_step(const kernels::Conv3dSpec& s, kernels::Shape5d& shape) {
    const kernels::Shape5d out = kernels::conv3d_output_shape(s, shape);
    const int64_t kernel_volume = int64_t(s.kt) * s.kh * s.kw;
    const int64_t f = out.c * out.t * out.h * out.w * 2 * kernel_volume *
                      (s.in_c / s.groups);
    shape = out;
    return f;
}

}  // namespace

int64_t x3d_flops(const X3DConfig& cfg) {
    const X3DLayout lay = X3DLayout::derive(cfg.factors, cfg.base_spatial);
    const int kt = lay.temporal_kernel;
    kernels::Shape5d s{1, cfg.in_channels, lay.frames, lay.spatial, lay.spatial};

    int64_t total = conv_cost_step(spec(cfg.in_channels, lay.widths[0], kt, 3, 3, 1, 2, 2), s);
    int64_t in_c = lay.widths[0];
    for (size_t st = 0; st < 4; ++st) {
        for (int64_t b = 0; b < lay.depths[st]; ++b) {
            const int64_t block_in_c = b == 0 ? in_c : lay.widths[st];
            const int ss = b == 0 ? 2 : 1;
            const kernels::Shape5d block_in = s;
            total += conv_cost_step(spec(block_in_c, lay.inner[st], 1, 1, 1, 1, 1, 1), s);
            total += conv_cost_step(
                spec(lay.inner[st], lay.inner[st], kt, 3, 3, 1, ss, ss, lay.inner[st]), s);
            total += conv_cost_step(spec(lay.inner[st], lay.widths[st], 1, 1, 1, 1, 1, 1), s);
            if (block_in_c != lay.widths[st] || ss != 1) {
                kernels::Shape5d proj_in = block_in;
                total += conv_cost_step(spec(block_in_c, lay.widths[st], 1, 1, 1, 1, ss, ss),
                                        proj_in);
            }
        }
        in_c = lay.widths[st];
    }
    total += conv_cost_step(spec(lay.widths[3], lay.head_inner, 1, 1, 1, 1, 1, 1), s);
    total += 2 * lay.head_inner * cfg.num_classes;
    return total;
}

}  // namespace exnet::models
