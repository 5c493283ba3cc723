#include "exnet/core/kernels.hpp"

#include <stdexcept>
#include <string>

#include "kernels_detail.hpp"

namespace exnet::kernels {

namespace {
Backend g_backend = Backend::parallel;
}

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

Shape5d conv3d_output_shape(const Conv3dSpec& s, const Shape5d& in) {
    if (in.c != s.in_c)
        throw std::invalid_argument("conv3d: input has " + std::to_string(in.c) +
                                    " channels, expected " + std::to_string(s.in_c));
    if (s.groups < 1 || s.in_c % s.groups != 0 || s.out_c % s.groups != 0)
        throw std::invalid_argument("conv3d: groups must divide in_c and out_c");
    Shape5d out;
    out.n = in.n;
    out.c = s.out_c;
    out.t = (in.t + 2 * s.pt - s.kt) / s.st + 1;
    out.h = (in.h + 2 * s.ph - s.kh) / s.sh + 1;
    out.w = (in.w + 2 * s.pw - s.kw) / s.sw + 1;
    if (out.t < 1 || out.h < 1 || out.w < 1)
        throw std::invalid_argument("conv3d: kernel does not fit input (" +
                                    std::to_string(in.t) + "," + std::to_string(in.h) + "," +
                                    std::to_string(in.w) + ")");
    return out;
}

#define EXNET_DISPATCH(fn, ...)                      \
    do {                                             \
        if (g_backend == Backend::serial)            \
            detail::serial::fn(__VA_ARGS__);         \
        else                                         \
            detail::parallel::fn(__VA_ARGS__);       \
    } while (0)

void gemm_nn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
    EXNET_DISPATCH(gemm_nn, a, b, c, m, k, n, accumulate);
}
void gemm_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
    EXNET_DISPATCH(gemm_nt, a, b, c, m, k, n, accumulate);
}
void gemm_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
    EXNET_DISPATCH(gemm_tn, a, b, c, m, k, n, accumulate);
}

void conv3d_forward(const Conv3dSpec& spec, const float* x, const Shape5d& xs, const float* w,
                    float* y) {
    EXNET_DISPATCH(conv3d_forward, spec, x, xs, w, y);
}
void conv3d_backward_input(const Conv3dSpec& spec, const float* dy, const Shape5d& xs,
                           const float* w, float* dx) {
    EXNET_DISPATCH(conv3d_backward_input, spec, dy, xs, w, dx);
}
void conv3d_backward_weight(const Conv3dSpec& spec, const float* x, const Shape5d& xs,
                            const float* dy, float* dw) {
    EXNET_DISPATCH(conv3d_backward_weight, spec, x, xs, dy, dw);
}

void batchnorm_stats(const float* x, const Shape5d& xs, float* mean, float* var) {
    EXNET_DISPATCH(batchnorm_stats, x, xs, mean, var);
}
void batchnorm_forward(const float* x, const Shape5d& xs, const float* mean, const float* var,
                       const float* gamma, const float* beta, float eps, float* y) {
    EXNET_DISPATCH(batchnorm_forward, x, xs, mean, var, gamma, beta, eps, y);
}
void batchnorm_backward(const float* x, const Shape5d& xs, const float* mean, const float* var,
                        const float* gamma, float eps, const float* dy, float* dx, float* dgamma,
                        float* dbeta) {
    EXNET_DISPATCH(batchnorm_backward, x, xs, mean, var, gamma, eps, dy, dx, dgamma, dbeta);
}

void maxpool3d_forward(const float* x, const Shape5d& xs, int kt, int kh, int kw, int st, int sh,
                       int sw, int pt, int ph, int pw, float* y, int64_t* argmax,
                       const Shape5d& ys) {
    EXNET_DISPATCH(maxpool3d_forward, x, xs, kt, kh, kw, st, sh, sw, pt, ph, pw, y, argmax, ys);
}
void maxpool3d_backward(const float* dy, const Shape5d& ys, const int64_t* argmax, float* dx,
                        const Shape5d& xs) {
    EXNET_DISPATCH(maxpool3d_backward, dy, ys, argmax, dx, xs);
}

void global_avgpool_forward(const float* x, const Shape5d& xs, float* y) {
    EXNET_DISPATCH(global_avgpool_forward, x, xs, y);
}
void global_avgpool_backward(const float* dy, const Shape5d& xs, float* dx) {
    EXNET_DISPATCH(global_avgpool_backward, dy, xs, dx);
}

void relu_forward(const float* x, int64_t n, float* y) { EXNET_DISPATCH(relu_forward, x, n, y); }
void relu_backward(const float* y, const float* dy, int64_t n, float* dx) {
    EXNET_DISPATCH(relu_backward, y, dy, n, dx);
}
void add_inplace(float* dst, const float* src, int64_t n) {
    EXNET_DISPATCH(add_inplace, dst, src, n);
}

void adam_step(float* param, const float* grad, float* m, float* v, int64_t n, float lr,
               float beta1, float beta2, float eps, int64_t t) {
    EXNET_DISPATCH(adam_step, param, grad, m, v, n, lr, beta1, beta2, eps, t);
}

#undef EXNET_DISPATCH

}  // namespace exnet::kernels
