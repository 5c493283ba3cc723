#include "exnet/nn/layer.hpp"

#include <cmath>
#include <stdexcept>

namespace exnet::nn {

kernels::Shape5d to_shape5d(const Tensor& t) {
    if (t.ndim() != 5)
        throw std::invalid_argument("expected a 5-d tensor (N,C,T,H,W), got " + t.shape_str());
    return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), t.dim(4)};
}

// ---- Conv3d -----------------------------------------------------------------

Conv3d::Conv3d(std::string name, kernels::Conv3dSpec spec)
    : spec_(spec),
      weight_(std::move(name),
              Tensor::zeros({spec.out_c, spec.in_c / spec.groups, spec.kt, spec.kh, spec.kw})) {}

void Conv3d::init_he(Rng& rng) {
    const int64_t fan_in = (spec_.in_c / spec_.groups) * spec_.kt * spec_.kh * spec_.kw;
    const float std_dev = std::sqrt(2.0f / float(fan_in));
    for (int64_t i = 0; i < weight_.value.numel(); ++i)
        weight_.value[i] = float(rng.normal()) * std_dev;
}

Tensor Conv3d::forward(const Tensor& x, bool training) {
    const auto xs = to_shape5d(x);
    const auto ys = kernels::conv3d_output_shape(spec_, xs);
    Tensor y = Tensor::zeros({ys.n, ys.c, ys.t, ys.h, ys.w});
    kernels::conv3d_forward(spec_, x.data(), xs, weight_.value.data(), y.data());
    if (training) cached_x_ = x;
    return y;
}

Tensor Conv3d::backward(const Tensor& dy) {
    const auto xs = to_shape5d(cached_x_);
    Tensor dx = Tensor::zeros(cached_x_.shape());
    kernels::conv3d_backward_weight(spec_, cached_x_.data(), xs, dy.data(),
                                    weight_.grad.data());
    kernels::conv3d_backward_input(spec_, dy.data(), xs, weight_.value.data(), dx.data());
    return dx;
}

int64_t Conv3d::flops(const kernels::Shape5d& in) const {
    const auto out = kernels::conv3d_output_shape(spec_, in);
    const int64_t kernel_volume = int64_t(spec_.kt) * spec_.kh * spec_.kw;
    const int64_t per_output = 2 * kernel_volume * (spec_.in_c / spec_.groups);
    return out.c * out.t * out.h * out.w * per_output;
}

// ---- BatchNorm3d -----------------------------------------------------------

BatchNorm3d::BatchNorm3d(std::string name, int64_t channels, float eps, float momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_(name + ".gamma", Tensor::full({channels}, 1.0f)),
      beta_(name + ".beta", Tensor::zeros({channels})),
      running_mean_{name + ".running_mean", Tensor::zeros({channels})},
      running_var_{name + ".running_var", Tensor::full({channels}, 1.0f)} {}

Tensor BatchNorm3d::forward(const Tensor& x, bool training) {
    const auto xs = to_shape5d(x);
    if (xs.c != channels_)
        throw std::invalid_argument("batchnorm expects " + std::to_string(channels_) +
                                    " channels, got " + std::to_string(xs.c));
    Tensor y = Tensor::zeros(x.shape());
    if (training) {
        batch_mean_ = Tensor::zeros({channels_});
        batch_var_ = Tensor::zeros({channels_});
        kernels::batchnorm_stats(x.data(), xs, batch_mean_.data(), batch_var_.data());
        kernels::batchnorm_forward(x.data(), xs, batch_mean_.data(), batch_var_.data(),
                                   gamma_.value.data(), beta_.value.data(), eps_, y.data());
        const int64_t count = xs.n * xs.t * xs.h * xs.w;
        // Running variance uses the unbiased estimate, batch normalization the biased one.
        const float bessel = count > 1 ? float(count) / float(count - 1) : 1.0f;
        for (int64_t c = 0; c < channels_; ++c) {
            running_mean_.value[c] =
                (1.0f - momentum_) * running_mean_.value[c] + momentum_ * batch_mean_[c];
            running_var_.value[c] = (1.0f - momentum_) * running_var_.value[c] +
                                    momentum_ * batch_var_[c] * bessel;
        }
        cached_x_ = x;
    } else {
        kernels::batchnorm_forward(x.data(), xs, running_mean_.value.data(),
                                   running_var_.value.data(), gamma_.value.data(),
                                   beta_.value.data(), eps_, y.data());
    }
    return y;
}

Tensor BatchNorm3d::backward(const Tensor& dy) {
    const auto xs = to_shape5d(cached_x_);
    Tensor dx = Tensor::zeros(cached_x_.shape());
    kernels::batchnorm_backward(cached_x_.data(), xs, batch_mean_.data(), batch_var_.data(),
                                gamma_.value.data(), eps_, dy.data(), dx.data(),
                                gamma_.grad.data(), beta_.grad.data());
    return dx;
}

// ---- ReLU --------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool training) {
    Tensor y = Tensor::zeros(x.shape());
    kernels::relu_forward(x.data(), x.numel(), y.data());
    if (training) cached_y_ = y;
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    Tensor dx = Tensor::zeros(dy.shape());
    kernels::relu_backward(cached_y_.data(), dy.data(), dy.numel(), dx.data());
    return dx;
}

// ---- MaxPool3d ----------------------------------------------------------------

MaxPool3d::MaxPool3d(int kt, int kh, int kw, int st, int sh, int sw, int pt, int ph, int pw)
    : kt_(kt), kh_(kh), kw_(kw), st_(st), sh_(sh), sw_(sw), pt_(pt), ph_(ph), pw_(pw) {}

Tensor MaxPool3d::forward(const Tensor& x, bool training) {
    in_shape_ = to_shape5d(x);
    kernels::Conv3dSpec s;
    s.in_c = in_shape_.c;
    s.out_c = in_shape_.c;
    s.kt = kt_;
    s.kh = kh_;
    s.kw = kw_;
    s.st = st_;
    s.sh = sh_;
    s.sw = sw_;
    s.pt = pt_;
    s.ph = ph_;
    s.pw = pw_;
    out_shape_ = kernels::conv3d_output_shape(s, in_shape_);
    Tensor y = Tensor::zeros({out_shape_.n, out_shape_.c, out_shape_.t, out_shape_.h,
                              out_shape_.w});
    argmax_.assign(static_cast<size_t>(out_shape_.numel()), -1);
    kernels::maxpool3d_forward(x.data(), in_shape_, kt_, kh_, kw_, st_, sh_, sw_, pt_, ph_, pw_,
                               y.data(), argmax_.data(), out_shape_);
    (void)training;
    return y;
}

Tensor MaxPool3d::backward(const Tensor& dy) {
    Tensor dx = Tensor::zeros({in_shape_.n, in_shape_.c, in_shape_.t, in_shape_.h, in_shape_.w});
    kernels::maxpool3d_backward(dy.data(), out_shape_, argmax_.data(), dx.data(), in_shape_);
    return dx;
}

// ---- GlobalAvgPool --------------------------------------------------------------

Tensor GlobalAvgPool::forward(const Tensor& x, bool training) {
    in_shape_ = to_shape5d(x);
    Tensor y = Tensor::zeros({in_shape_.n, in_shape_.c});
    kernels::global_avgpool_forward(x.data(), in_shape_, y.data());
    (void)training;
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    Tensor dx = Tensor::zeros({in_shape_.n, in_shape_.c, in_shape_.t, in_shape_.h, in_shape_.w});
    kernels::global_avgpool_backward(dy.data(), in_shape_, dx.data());
    return dx;
}

// ---- Linear ----------------------------------------------------------------------

Linear::Linear(std::string name, int64_t in_features, int64_t out_features)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", Tensor::zeros({out_features, in_features})),
      bias_(name + ".bias", Tensor::zeros({out_features})) {}

void Linear::init_he(Rng& rng) {
    const float std_dev = std::sqrt(2.0f / float(in_));
    for (int64_t i = 0; i < weight_.value.numel(); ++i)
        weight_.value[i] = float(rng.normal()) * std_dev;
    bias_.value.fill(0.0f);
}

Tensor Linear::forward(const Tensor& x, bool training) {
    if (x.ndim() != 2 || x.dim(1) != in_)
        throw std::invalid_argument("linear expects (N," + std::to_string(in_) + "), got " +
                                    x.shape_str());
    const int64_t n = x.dim(0);
    Tensor y = Tensor::zeros({n, out_});
    kernels::gemm_nt(x.data(), weight_.value.data(), y.data(), n, in_, out_, false);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < out_; ++j) y[i * out_ + j] += bias_.value[j];
    if (training) cached_x_ = x;
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    const int64_t n = cached_x_.dim(0);
    // dW += dy^T x ; db += column sums ; dx = dy W
    kernels::gemm_tn(dy.data(), cached_x_.data(), weight_.grad.data(), out_, n, in_, true);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < out_; ++j) bias_.grad[j] += dy[i * out_ + j];
    Tensor dx = Tensor::zeros({n, in_});
    kernels::gemm_nn(dy.data(), weight_.value.data(), dx.data(), n, out_, in_, false);
    return dx;
}

}  // namespace exnet::nn
