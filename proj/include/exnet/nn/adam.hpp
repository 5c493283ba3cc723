#pragma once

#include <cstdint>
#include <vector>

#include "exnet/nn/layer.hpp"

namespace exnet::nn {

// Adam with bias correction over a fixed set of parameters.
class Adam {
public:
    explicit Adam(std::vector<Parameter*> params, float lr = 1e-4f, float beta1 = 0.9f,
                  float beta2 = 0.999f, float eps = 1e-8f);

    void zero_grad();
    void step();

    float lr() const { return lr_; }
    void set_lr(float lr) { lr_ = lr; }
    int64_t timestep() const { return t_; }

private:
    std::vector<Parameter*> params_;
    float lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

}  // namespace exnet::nn
