#include "exnet/nn/adam.hpp"

#include "exnet/core/kernels.hpp"

namespace exnet::nn {

Adam::Adam(std::vector<Parameter*> params, float lr, float beta1, float beta2, float eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
    ++t_;
    for (Parameter* p : params_) {
        if (p->adam_m.numel() != p->value.numel()) {
            p->adam_m = Tensor::zeros(p->value.shape());
            p->adam_v = Tensor::zeros(p->value.shape());
        }
        kernels::adam_step(p->value.data(), p->grad.data(), p->adam_m.data(), p->adam_v.data(),
                           p->value.numel(), lr_, beta1_, beta2_, eps_, t_);
    }
}

}  // namespace exnet::nn
