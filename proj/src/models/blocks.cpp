#include "exnet/models/blocks.hpp"

#include <cstring>
#include <stdexcept>

#include "exnet/core/kernels.hpp"

namespace exnet::models {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 5 || b.ndim() != 5)
        throw std::invalid_argument("concat_channels expects 5-d tensors");
    for (int d : {0, 2, 3, 4})
        if (a.dim(d) != b.dim(d))
            throw std::invalid_argument("concat_channels shape mismatch: " + a.shape_str() +
                                        " vs " + b.shape_str());
    const int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const int64_t vol = a.dim(2) * a.dim(3) * a.dim(4);
    Tensor out = Tensor::zeros({n, ca + cb, a.dim(2), a.dim(3), a.dim(4)});
    for (int64_t i = 0; i < n; ++i) {
        std::memcpy(out.data() + i * (ca + cb) * vol, a.data() + i * ca * vol,
                    size_t(ca * vol) * sizeof(float));
        std::memcpy(out.data() + (i * (ca + cb) + ca) * vol, b.data() + i * cb * vol,
                    size_t(cb * vol) * sizeof(float));
    }
    return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& x, int64_t first_channels) {
    if (x.ndim() != 5) throw std::invalid_argument("split_channels expects a 5-d tensor");
    const int64_t n = x.dim(0), c = x.dim(1);
    if (first_channels <= 0 || first_channels >= c)
        throw std::invalid_argument("split point " + std::to_string(first_channels) +
                                    " outside (0," + std::to_string(c) + ")");
    const int64_t ca = first_channels, cb = c - first_channels;
    const int64_t vol = x.dim(2) * x.dim(3) * x.dim(4);
    Tensor a = Tensor::zeros({n, ca, x.dim(2), x.dim(3), x.dim(4)});
    Tensor b = Tensor::zeros({n, cb, x.dim(2), x.dim(3), x.dim(4)});
    for (int64_t i = 0; i < n; ++i) {
        std::memcpy(a.data() + i * ca * vol, x.data() + i * c * vol,
                    size_t(ca * vol) * sizeof(float));
        std::memcpy(b.data() + i * cb * vol, x.data() + (i * c + ca) * vol,
                    size_t(cb * vol) * sizeof(float));
    }
    return {std::move(a), std::move(b)};
}

Tensor subsample_frames(const Tensor& x, int64_t stride) {
    if (x.ndim() != 5) throw std::invalid_argument("subsample_frames expects a 5-d tensor");
    if (stride < 1) throw std::invalid_argument("frame stride must be >= 1");
    if (stride == 1) return x;
    const int64_t n = x.dim(0), c = x.dim(1), t = x.dim(2), h = x.dim(3), w = x.dim(4);
    const int64_t to = (t + stride - 1) / stride;
    const int64_t hw = h * w;
    Tensor out = Tensor::zeros({n, c, to, h, w});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t ot = 0; ot < to; ++ot)
                std::memcpy(out.data() + ((i * c + ch) * to + ot) * hw,
                            x.data() + ((i * c + ch) * t + ot * stride) * hw,
                            size_t(hw) * sizeof(float));
    return out;
}

namespace {

kernels::Conv3dSpec conv_spec(int64_t in_c, int64_t out_c, int kt, int kh, int kw, int st,
                              int sh, int sw, int64_t groups = 1) {
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

// ---- Bottleneck ---------------------------------------------------------------

Bottleneck::Bottleneck(const std::string& name, int64_t in_c, int64_t inner_c, int64_t out_c,
                       int kt, int spatial_stride)
    : conv1_(name + ".conv1.weight", conv_spec(in_c, inner_c, kt, 1, 1, 1, 1, 1)),
      bn1_(name + ".bn1", inner_c),
      conv2_(name + ".conv2.weight",
             conv_spec(inner_c, inner_c, 1, 3, 3, 1, spatial_stride, spatial_stride)),
      bn2_(name + ".bn2", inner_c),
      conv3_(name + ".conv3.weight", conv_spec(inner_c, out_c, 1, 1, 1, 1, 1, 1)),
      bn3_(name + ".bn3", out_c),
      has_proj_(in_c != out_c || spatial_stride != 1) {
    if (has_proj_) {
        proj_.emplace(name + ".proj.weight",
                      conv_spec(in_c, out_c, 1, 1, 1, 1, spatial_stride, spatial_stride));
        proj_bn_.emplace(name + ".proj_bn", out_c);
    }
}

Tensor Bottleneck::forward(const Tensor& x, bool training) {
    Tensor h = relu1_.forward(bn1_.forward(conv1_.forward(x, training), training), training);
    h = relu2_.forward(bn2_.forward(conv2_.forward(h, training), training), training);
    h = bn3_.forward(conv3_.forward(h, training), training);
    Tensor shortcut = has_proj_
                          ? proj_bn_->forward(proj_->forward(x, training), training)
                          : x;
    kernels::add_inplace(h.data(), shortcut.data(), h.numel());
    return relu_out_.forward(h, training);
}

Tensor Bottleneck::backward(const Tensor& dy) {
    Tensor d_sum = relu_out_.backward(dy);
    Tensor d_main = conv1_.backward(
        bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(relu2_.backward(
            conv3_.backward(bn3_.backward(d_sum))))))));
    Tensor d_short = has_proj_ ? proj_->backward(proj_bn_->backward(d_sum)) : d_sum;
    kernels::add_inplace(d_main.data(), d_short.data(), d_main.numel());
    return d_main;
}

void Bottleneck::collect(std::vector<Parameter*>& params, std::vector<Buffer*>& buffers) {
    for (nn::Layer* l :
         std::initializer_list<nn::Layer*>{&conv1_, &bn1_, &conv2_, &bn2_, &conv3_, &bn3_}) {
        for (auto* p : l->params()) params.push_back(p);
        for (auto* b : l->buffers()) buffers.push_back(b);
    }
    if (has_proj_) {
        for (auto* p : proj_->params()) params.push_back(p);
        for (auto* p : proj_bn_->params()) params.push_back(p);
        for (auto* b : proj_bn_->buffers()) buffers.push_back(b);
    }
}

void Bottleneck::init_params(Rng& rng) {
    conv1_.init_he(rng);
    conv2_.init_he(rng);
    conv3_.init_he(rng);
    if (has_proj_) proj_->init_he(rng);
}

int64_t Bottleneck::flops(kernels::Shape5d& shape) const {
    int64_t total = 0;
    kernels::Shape5d s = shape;
    total += conv1_.flops(s);
    s = kernels::conv3d_output_shape(conv1_.spec(), s);
    total += conv2_.flops(s);
    s = kernels::conv3d_output_shape(conv2_.spec(), s);
    total += conv3_.flops(s);
    s = kernels::conv3d_output_shape(conv3_.spec(), s);
    if (has_proj_) total += proj_->flops(shape);
    shape = s;
    return total;
}

int64_t Bottleneck::param_count() const {
    int64_t total = conv1_.param_count() + conv2_.param_count() + conv3_.param_count();
    total += 2 * (bn1_.channels() + bn2_.channels() + bn3_.channels());
    if (has_proj_) total += proj_->param_count() + 2 * proj_bn_->channels();
    return total;
}

// ---- InvertedBottleneck ----------------------------------------------------------

InvertedBottleneck::InvertedBottleneck(const std::string& name, int64_t in_c, int64_t inner_c,
                                       int64_t out_c, int kt, int spatial_stride)
    : conv1_(name + ".conv1.weight", conv_spec(in_c, inner_c, 1, 1, 1, 1, 1, 1)),
      bn1_(name + ".bn1", inner_c),
      conv2_(name + ".conv2.weight",
             conv_spec(inner_c, inner_c, kt, 3, 3, 1, spatial_stride, spatial_stride, inner_c)),
      bn2_(name + ".bn2", inner_c),
      conv3_(name + ".conv3.weight", conv_spec(inner_c, out_c, 1, 1, 1, 1, 1, 1)),
      bn3_(name + ".bn3", out_c),
      has_proj_(in_c != out_c || spatial_stride != 1) {
    if (has_proj_) {
        proj_.emplace(name + ".proj.weight",
                      conv_spec(in_c, out_c, 1, 1, 1, 1, spatial_stride, spatial_stride));
        proj_bn_.emplace(name + ".proj_bn", out_c);
    }
}

Tensor InvertedBottleneck::forward(const Tensor& x, bool training) {
    Tensor h = relu1_.forward(bn1_.forward(conv1_.forward(x, training), training), training);
    h = relu2_.forward(bn2_.forward(conv2_.forward(h, training), training), training);
    h = bn3_.forward(conv3_.forward(h, training), training);
    Tensor shortcut = has_proj_
                          ? proj_bn_->forward(proj_->forward(x, training), training)
                          : x;
    kernels::add_inplace(h.data(), shortcut.data(), h.numel());
    return relu_out_.forward(h, training);
}

Tensor InvertedBottleneck::backward(const Tensor& dy) {
    Tensor d_sum = relu_out_.backward(dy);
    Tensor d_main = conv1_.backward(
        bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(relu2_.backward(
            conv3_.backward(bn3_.backward(d_sum))))))));
    Tensor d_short = has_proj_ ? proj_->backward(proj_bn_->backward(d_sum)) : d_sum;
    kernels::add_inplace(d_main.data(), d_short.data(), d_main.numel());
    return d_main;
}

void InvertedBottleneck::collect(std::vector<Parameter*>& params,
                                 std::vector<Buffer*>& buffers) {
    for (nn::Layer* l :
         std::initializer_list<nn::Layer*>{&conv1_, &bn1_, &conv2_, &bn2_, &conv3_, &bn3_}) {
        for (auto* p : l->params()) params.push_back(p);
        for (auto* b : l->buffers()) buffers.push_back(b);
    }
    if (has_proj_) {
        for (auto* p : proj_->params()) params.push_back(p);
        for (auto* p : proj_bn_->params()) params.push_back(p);
        for (auto* b : proj_bn_->buffers()) buffers.push_back(b);
    }
}

void InvertedBottleneck::init_params(Rng& rng) {
    conv1_.init_he(rng);
    conv2_.init_he(rng);
    conv3_.init_he(rng);
    if (has_proj_) proj_->init_he(rng);
}

int64_t InvertedBottleneck::flops(kernels::Shape5d& shape) const {
    int64_t total = 0;
    kernels::Shape5d s = shape;
    total += conv1_.flops(s);
    s = kernels::conv3d_output_shape(conv1_.spec(), s);
    total += conv2_.flops(s);
    s = kernels::conv3d_output_shape(conv2_.spec(), s);
    total += conv3_.flops(s);
    s = kernels::conv3d_output_shape(conv3_.spec(), s);
    if (has_proj_) total += proj_->flops(shape);
    shape = s;
    return total;
}

int64_t InvertedBottleneck::param_count() const {
    int64_t total = conv1_.param_count() + conv2_.param_count() + conv3_.param_count();
    total += 2 * (bn1_.channels() + bn2_.channels() + bn3_.channels());
    if (has_proj_) total += proj_->param_count() + 2 * proj_bn_->channels();
    return total;
}

}  // namespace exnet::models
