#pragma once

#include "exnet/core/kernels.hpp"

// Backend-specific entry points. Signatures mirror the public dispatchers.

#define EXNET_KERNEL_DECLS                                                                      \
    void gemm_nn(const float*, const float*, float*, int64_t, int64_t, int64_t, bool);         \
    void gemm_nt(const float*, const float*, float*, int64_t, int64_t, int64_t, bool);         \
    void gemm_tn(const float*, const float*, float*, int64_t, int64_t, int64_t, bool);         \
    void conv3d_forward(const Conv3dSpec&, const float*, const Shape5d&, const float*, float*); \
    void conv3d_backward_input(const Conv3dSpec&, const float*, const Shape5d&, const float*,   \
                               float*);                                                        \
    void conv3d_backward_weight(const Conv3dSpec&, const float*, const Shape5d&, const float*,  \
                                float*);                                                       \
    void batchnorm_stats(const float*, const Shape5d&, float*, float*);                         \
    void batchnorm_forward(const float*, const Shape5d&, const float*, const float*,            \
                           const float*, const float*, float, float*);                          \
    void batchnorm_backward(const float*, const Shape5d&, const float*, const float*,           \
                            const float*, float, const float*, float*, float*, float*);        \
    void maxpool3d_forward(const float*, const Shape5d&, int, int, int, int, int, int, int,     \
                           int, int, float*, int64_t*, const Shape5d&);                         \
    void maxpool3d_backward(const float*, const Shape5d&, const int64_t*, float*,               \
                            const Shape5d&);                                                    \
    void global_avgpool_forward(const float*, const Shape5d&, float*);                          \
    void global_avgpool_backward(const float*, const Shape5d&, float*);                         \
    void relu_forward(const float*, int64_t, float*);                                          \
    void relu_backward(const float*, const float*, int64_t, float*);                           \
    void add_inplace(float*, const float*, int64_t);                                           \
    void adam_step(float*, const float*, float*, float*, int64_t, float, float, float, float,  \
                   int64_t);

namespace exnet::kernels::detail::serial {
EXNET_KERNEL_DECLS
}
namespace exnet::kernels::detail::parallel {
EXNET_KERNEL_DECLS
}
