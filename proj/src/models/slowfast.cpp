#include "exnet/models/slowfast.hpp"

#include <cmath>
#include <stdexcept>

namespace exnet::models {

namespace {

kernels::Conv3dSpec spec(int64_t in_c, int64_t out_c, int kt, int kh, int kw, int st, int sh,
                         int sw, int pt, int ph, int pw) {
    kernels::Conv3dSpec s;
    s.in_c = in_c;
    s.out_c = out_c;
    s.kt = kt;
    s.kh = kh;
    s.kw = kw;
    s.st = st;
    s.sh = sh;
    s.sw = sw;
    s.pt = pt;
    s.ph = ph;
    s.pw = pw;
    return s;
}

Tensor concat_features(const Tensor& a, const Tensor& b) {
    const int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    Tensor out = Tensor::zeros({n, ca + cb});
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < ca; ++j) out[i * (ca + cb) + j] = a[i * ca + j];
        for (int64_t j = 0; j < cb; ++j) out[i * (ca + cb) + ca + j] = b[i * cb + j];
    }
    return out;
}

std::pair<Tensor, Tensor> split_features(const Tensor& x, int64_t first) {
    const int64_t n = x.dim(0), c = x.dim(1);
    Tensor a = Tensor::zeros({n, first});
    Tensor b = Tensor::zeros({n, c - first});
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < first; ++j) a[i * first + j] = x[i * c + j];
        for (int64_t j = first; j < c; ++j) b[i * (c - first) + (j - first)] = x[i * c + j];
    }
    return {std::move(a), std::move(b)};
}

}  // namespace

SlowFastConfig SlowFastConfig::from_json(int depth, const nlohmann::json& overrides) {
    const nlohmann::json ov =
        overrides.is_object() ? overrides : nlohmann::json::object();
    SlowFastConfig cfg;
    cfg.depth = depth;
    cfg.num_classes = ov.value("num_classes", cfg.num_classes);
    cfg.head = ov.value("head", cfg.head);
    cfg.frames = ov.value("frames", cfg.frames);
    cfg.tau = ov.value("tau", cfg.tau);
    cfg.alpha = ov.value("alpha", cfg.alpha);
    cfg.inverse_beta = ov.value("inverse_beta", cfg.inverse_beta);
    cfg.height = ov.value("height", cfg.height);
    cfg.width = ov.value("width", cfg.width);
    cfg.in_channels = ov.value("in_channels", cfg.in_channels);
    return cfg;
}

int64_t SlowFast::fast_width(int64_t slow_width) const {
    return std::llround(double(slow_width) / double(cfg_.inverse_beta));
}

SlowFast::SlowFast(const SlowFastConfig& cfg) : cfg_(cfg) {
    if (cfg_.depth != 50 && cfg_.depth != 101)
        throw std::invalid_argument("supported depths are 50 and 101");
    if (cfg_.tau < 1 || cfg_.alpha < 1 || cfg_.inverse_beta < 2)
        throw std::invalid_argument("tau >= 1, alpha >= 1, inverse_beta >= 2 required");
    if (cfg_.frames % cfg_.tau != 0)
        throw std::invalid_argument("frames (" + std::to_string(cfg_.frames) +
                                    ") must be divisible by tau (" + std::to_string(cfg_.tau) +
                                    ")");
    slow_t_ = cfg_.frames / cfg_.tau;
    if (cfg_.alpha >= cfg_.tau) {
        fast_stride_ = 1;
    } else {
        if (cfg_.tau % cfg_.alpha != 0)
            throw std::invalid_argument("tau must be a multiple of alpha when alpha < tau");
        fast_stride_ = cfg_.tau / cfg_.alpha;
    }
    if (cfg_.frames % fast_stride_ != 0)
        throw std::invalid_argument("frames must be divisible by the fast-path stride");
    fast_t_ = cfg_.frames / fast_stride_;
    if (fast_t_ % slow_t_ != 0)
        throw std::invalid_argument("fast frame count must be a multiple of the slow one");
    lateral_stride_ = fast_t_ / slow_t_;

    stage_out_ = {256, 512, 1024, 2048};
    stage_inner_ = {64, 128, 256, 512};
    stage_blocks_ = cfg_.depth == 50 ? std::vector<int>{3, 4, 6, 3}
                                     : std::vector<int>{3, 4, 23, 3};
    const std::vector<int> slow_kt = {1, 1, 3, 3};
    const std::vector<int> spatial_stride = {1, 2, 2, 2};

    // Slow pathway.
    slow_.stem_conv = std::make_unique<Conv3d>(
        "slow.stem.conv.weight", spec(cfg_.in_channels, 64, 1, 7, 7, 1, 2, 2, 0, 3, 3));
    slow_.stem_bn = std::make_unique<BatchNorm3d>("slow.stem.bn", 64);
    slow_.stem_pool = std::make_unique<nn::MaxPool3d>(1, 3, 3, 1, 2, 2, 0, 1, 1);
    int64_t slow_in = 64 + 2 * fast_width(64);
    slow_.stages.resize(4);
    for (int st = 0; st < 4; ++st) {
        for (int b = 0; b < stage_blocks_[size_t(st)]; ++b) {
            const std::string name =
                "slow.res" + std::to_string(st + 1) + ".block" + std::to_string(b);
            const int64_t in_c = b == 0 ? slow_in : stage_out_[size_t(st)];
            slow_.stages[size_t(st)].emplace_back(name, in_c, stage_inner_[size_t(st)],
                                                  stage_out_[size_t(st)], slow_kt[size_t(st)],
                                                  b == 0 ? spatial_stride[size_t(st)] : 1);
        }
        slow_in = stage_out_[size_t(st)] + 2 * fast_width(stage_out_[size_t(st)]);
    }

    // Fast pathway.
    const int64_t fast_stem_c = fast_width(64);
    fast_.stem_conv = std::make_unique<Conv3d>(
        "fast.stem.conv.weight",
        spec(cfg_.in_channels, fast_stem_c, 5, 7, 7, 1, 2, 2, 2, 3, 3));
    fast_.stem_bn = std::make_unique<BatchNorm3d>("fast.stem.bn", fast_stem_c);
    fast_.stem_pool = std::make_unique<nn::MaxPool3d>(1, 3, 3, 1, 2, 2, 0, 1, 1);
    fast_.stages.resize(4);
    int64_t fast_in = fast_stem_c;
    for (int st = 0; st < 4; ++st) {
        const int64_t out_c = fast_width(stage_out_[size_t(st)]);
        const int64_t inner_c = fast_width(stage_inner_[size_t(st)]);
        for (int b = 0; b < stage_blocks_[size_t(st)]; ++b) {
            const std::string name =
                "fast.res" + std::to_string(st + 1) + ".block" + std::to_string(b);
            const int64_t in_c = b == 0 ? fast_in : out_c;
            fast_.stages[size_t(st)].emplace_back(name, in_c, inner_c, out_c, 3,
                                                  b == 0 ? spatial_stride[size_t(st)] : 1);
        }
        fast_in = out_c;
    }

    // Lateral fast->slow fusions: time-strided conv doubling the fast width.
    const int64_t lateral_in[5] = {fast_stem_c, fast_width(256), fast_width(512),
                                   fast_width(1024), fast_width(2048)};
    for (int i = 0; i < 5; ++i) {
        laterals_[i].conv = std::make_unique<Conv3d>(
            "lateral" + std::to_string(i) + ".conv.weight",
            spec(lateral_in[i], 2 * lateral_in[i], 5, 1, 1, int(lateral_stride_), 1, 1, 2, 0,
                 0));
        laterals_[i].bn = std::make_unique<BatchNorm3d>("lateral" + std::to_string(i) + ".bn",
                                                        2 * lateral_in[i]);
    }

    slow_gap_c_ = stage_out_[3] + 2 * fast_width(stage_out_[3]);
    head_in_ = slow_gap_c_ + fast_width(stage_out_[3]);
    fc_ = std::make_unique<nn::Linear>("head.fc", head_in_, cfg_.num_classes);
}

Tensor SlowFast::run_lateral(int i, const Tensor& fast_feature, bool training) {
    auto& lat = laterals_[i];
    return lat.relu.forward(
        lat.bn->forward(lat.conv->forward(fast_feature, training), training), training);
}

Tensor SlowFast::lateral_backward(int i, const Tensor& dy) {
    auto& lat = laterals_[i];
    return lat.conv->backward(lat.bn->backward(lat.relu.backward(dy)));
}

Tensor SlowFast::stage_forward(std::vector<Bottleneck>& stage, Tensor x, bool training) {
    for (auto& block : stage) x = block.forward(x, training);
    return x;
}

Tensor SlowFast::stage_backward(std::vector<Bottleneck>& stage, Tensor dy) {
    for (auto it = stage.rbegin(); it != stage.rend(); ++it) dy = it->backward(dy);
    return dy;
}

Tensor SlowFast::forward(const Tensor& x, bool training) {
    const auto xs = nn::to_shape5d(x);
    if (xs.c != cfg_.in_channels || xs.t != cfg_.frames)
        throw std::invalid_argument("expected (N," + std::to_string(cfg_.in_channels) + "," +
                                    std::to_string(cfg_.frames) + ",H,W), got " + x.shape_str());

    // Fast pathway first; its stage outputs feed the laterals.
    Tensor f = subsample_frames(x, fast_stride_);
    f = fast_.stem_pool->forward(
        fast_.stem_relu.forward(
            fast_.stem_bn->forward(fast_.stem_conv->forward(f, training), training), training),
        training);
    Tensor fuse[5];
    fuse[0] = run_lateral(0, f, training);
    for (int st = 0; st < 4; ++st) {
        f = stage_forward(fast_.stages[size_t(st)], std::move(f), training);
        fuse[st + 1] = run_lateral(st + 1, f, training);
    }

    Tensor s = subsample_frames(x, cfg_.tau);
    s = slow_.stem_pool->forward(
        slow_.stem_relu.forward(
            slow_.stem_bn->forward(slow_.stem_conv->forward(s, training), training), training),
        training);
    for (int st = 0; st < 4; ++st) {
        s = concat_channels(s, fuse[st]);
        s = stage_forward(slow_.stages[size_t(st)], std::move(s), training);
    }
    s = concat_channels(s, fuse[4]);

    Tensor gs = gap_slow_.forward(s, training);
    Tensor gf = gap_fast_.forward(f, training);
    return fc_->forward(concat_features(gs, gf), training);
}

Tensor SlowFast::backward(const Tensor& dlogits) {
    Tensor dfeat = fc_->backward(dlogits);
    auto [dgs, dgf] = split_features(dfeat, slow_gap_c_);
    Tensor ds = gap_slow_.backward(dgs);
    Tensor df = gap_fast_.backward(dgf);

    // Unwind the slow pathway, collecting the gradient each lateral receives.
    auto [ds4, dl4] = split_channels(ds, stage_out_[3]);
    kernels::add_inplace(df.data(), lateral_backward(4, dl4).data(), df.numel());
    Tensor d_slow = std::move(ds4);
    Tensor d_lat[4];
    for (int st = 3; st >= 0; --st) {
        d_slow = stage_backward(slow_.stages[size_t(st)], std::move(d_slow));
        const int64_t base_c = st == 0 ? 64 : stage_out_[size_t(st - 1)];
        auto [d_prev, dl] = split_channels(d_slow, base_c);
        d_slow = std::move(d_prev);
        d_lat[st] = std::move(dl);
    }
    Tensor d_stem = slow_.stem_bn->backward(
        slow_.stem_relu.backward(slow_.stem_pool->backward(d_slow)));
    slow_.stem_conv->backward(d_stem);

    // Fast pathway: each stage gets gradients from the next stage and from
    // its lateral tap.
    for (int st = 3; st >= 0; --st) {
        df = stage_backward(fast_.stages[size_t(st)], std::move(df));
        kernels::add_inplace(df.data(), lateral_backward(st, d_lat[st]).data(), df.numel());
    }
    Tensor d_fstem = fast_.stem_bn->backward(
        fast_.stem_relu.backward(fast_.stem_pool->backward(df)));
    fast_.stem_conv->backward(d_fstem);

    // Input gradients are not propagated through the frame subsampling.
    return Tensor();
}

std::vector<Parameter*> SlowFast::parameters() {
    std::vector<Parameter*> out;
    std::vector<Buffer*> bufs;
    auto add_layer = [&](nn::Layer* l) {
        for (auto* p : l->params()) out.push_back(p);
    };
    for (Pathway* path : {&slow_, &fast_}) {
        add_layer(path->stem_conv.get());
        add_layer(path->stem_bn.get());
        for (auto& stage : path->stages)
            for (auto& block : stage) block.collect(out, bufs);
    }
    for (auto& lat : laterals_) {
        add_layer(lat.conv.get());
        add_layer(lat.bn.get());
    }
    add_layer(fc_.get());
    return out;
}

std::vector<Buffer*> SlowFast::buffers() {
    std::vector<Parameter*> params;
    std::vector<Buffer*> out;
    for (Pathway* path : {&slow_, &fast_}) {
        for (auto* b : path->stem_bn->buffers()) out.push_back(b);
        for (auto& stage : path->stages)
            for (auto& block : stage) block.collect(params, out);
    }
    for (auto& lat : laterals_)
        for (auto* b : lat.bn->buffers()) out.push_back(b);
    return out;
}

std::string SlowFast::arch_name() const {
    return cfg_.depth == 50 ? "slowfast_r50" : "slowfast_r101";
}

nlohmann::json SlowFast::config_json() const {
    return {{"arch", arch_name()},
            {"num_classes", cfg_.num_classes},
            {"head", cfg_.head},
            {"frames", cfg_.frames},
            {"tau", cfg_.tau},
            {"alpha", cfg_.alpha},
            {"inverse_beta", cfg_.inverse_beta},
            {"height", cfg_.height},
            {"width", cfg_.width},
            {"in_channels", cfg_.in_channels}};
}

void SlowFast::replace_head(int64_t new_classes, const std::string& head_kind, Rng& rng) {
    cfg_.num_classes = new_classes;
    cfg_.head = head_kind;
    fc_ = std::make_unique<nn::Linear>("head.fc", head_in_, new_classes);
    fc_->init_he(rng);
}

kernels::Shape5d SlowFast::input_shape() const {
    return {1, cfg_.in_channels, cfg_.frames, cfg_.height, cfg_.width};
}

std::vector<int64_t> SlowFast::lateral_output_frames() const {
    std::vector<int64_t> out;
    for (int i = 0; i < 5; ++i) {
        kernels::Shape5d in{1, laterals_[i].conv->spec().in_c, fast_t_, 1, 1};
        out.push_back(kernels::conv3d_output_shape(laterals_[i].conv->spec(), in).t);
    }
    return out;
}

int64_t SlowFast::flops() const {
    int64_t total = 0;

    // Fast pathway walk, capturing the shape at each lateral tap.
    kernels::Shape5d fshape{1, cfg_.in_channels, fast_t_, cfg_.height, cfg_.width};
    total += fast_.stem_conv->flops(fshape);
    fshape = kernels::conv3d_output_shape(fast_.stem_conv->spec(), fshape);
    kernels::Conv3dSpec pool = {};
    pool.in_c = fshape.c;
    pool.out_c = fshape.c;
    pool.kt = 1;
    pool.kh = 3;
    pool.kw = 3;
    pool.st = 1;
    pool.sh = 2;
    pool.sw = 2;
    pool.ph = 1;
    pool.pw = 1;
    fshape = kernels::conv3d_output_shape(pool, fshape);
    kernels::Shape5d tap[5];
    tap[0] = fshape;
    for (int st = 0; st < 4; ++st) {
        for (const auto& block : fast_.stages[size_t(st)]) total += block.flops(fshape);
        tap[st + 1] = fshape;
    }

    // Laterals.
    kernels::Shape5d lat_out[5];
    for (int i = 0; i < 5; ++i) {
        total += laterals_[i].conv->flops(tap[i]);
        lat_out[i] = kernels::conv3d_output_shape(laterals_[i].conv->spec(), tap[i]);
    }

    // Slow pathway walk with channel widening at each fusion.
    kernels::Shape5d sshape{1, cfg_.in_channels, slow_t_, cfg_.height, cfg_.width};
    total += slow_.stem_conv->flops(sshape);
    sshape = kernels::conv3d_output_shape(slow_.stem_conv->spec(), sshape);
    pool.in_c = pool.out_c = sshape.c;
    sshape = kernels::conv3d_output_shape(pool, sshape);
    for (int st = 0; st < 4; ++st) {
        sshape.c += lat_out[st].c;
        for (const auto& block : slow_.stages[size_t(st)]) total += block.flops(sshape);
    }

    total += fc_->flops();
    return total;
}

int64_t SlowFast::param_count() const {
    int64_t total = 0;
    for (const Pathway* path : {&slow_, &fast_}) {
        total += path->stem_conv->param_count() + 2 * path->stem_bn->channels();
        for (const auto& stage : path->stages)
            for (const auto& block : stage) total += block.param_count();
    }
    for (const auto& lat : laterals_)
        total += lat.conv->param_count() + 2 * lat.bn->channels();
    total += fc_->param_count();
    return total;
}

void SlowFast::init_params(Rng& rng) {
    for (Pathway* path : {&slow_, &fast_}) {
        path->stem_conv->init_he(rng);
        for (auto& stage : path->stages)
            for (auto& block : stage) block.init_params(rng);
    }
    for (auto& lat : laterals_) lat.conv->init_he(rng);
    fc_->init_he(rng);
}

}  // namespace exnet::models
