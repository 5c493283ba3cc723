#pragma once

#include <cstdint>

namespace exnet::kernels {

// The parallel backend is the production path. The serial backend is a
// plain-loop reference used by tests and the kernel benchmark; it shares no
// inner loops with the parallel code.
enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);

// A no-copy guard for running a scope on a chosen backend.
class BackendScope {
public:
    explicit BackendScope(Backend b) : saved_(backend()) { set_backend(b); }
    ~BackendScope() { set_backend(saved_); }

private:
    Backend saved_;
};

// ---- GEMM -----------------------------------------------------------------
// Row-major. When accumulate is false, C is overwritten.

// C[m,n] = A[m,k] * B[k,n]
void gemm_nn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate);
// C[m,n] = A[m,k] * B[n,k]^T
void gemm_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate);
// C[m,n] = A[k,m]^T * B[k,n]
void gemm_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate);

// ---- 3D convolution ---------------------------------------------------------

struct Conv3dSpec {
    int64_t in_c = 0;
    int64_t out_c = 0;
    int kt = 1, kh = 1, kw = 1;
    int st = 1, sh = 1, sw = 1;
    int pt = 0, ph = 0, pw = 0;
    int64_t groups = 1;
};

struct Shape5d {
    int64_t n = 1, c = 0, t = 0, h = 0, w = 0;
    int64_t numel() const { return n * c * t * h * w; }
};

Shape5d conv3d_output_shape(const Conv3dSpec& spec, const Shape5d& in);

// x: (N,Cin,T,H,W)  w: (Cout, Cin/groups, kt,kh,kw)  y: (N,Cout,To,Ho,Wo)
void conv3d_forward(const Conv3dSpec& spec, const float* x, const Shape5d& xs,
                    const float* w, float* y);
// dx is overwritten.
void conv3d_backward_input(const Conv3dSpec& spec, const float* dy, const Shape5d& xs,
                           const float* w, float* dx);
// dw is accumulated into.
void conv3d_backward_weight(const Conv3dSpec& spec, const float* x, const Shape5d& xs,
                            const float* dy, float* dw);

// ---- Batch norm over (N,T,H,W) per channel ----------------------------------

void batchnorm_stats(const float* x, const Shape5d& xs, float* mean, float* var);
void batchnorm_forward(const float* x, const Shape5d& xs, const float* mean, const float* var,
                       const float* gamma, const float* beta, float eps, float* y);
// dgamma/dbeta accumulated; dx overwritten. x_hat = (x-mean)/sqrt(var+eps).
void batchnorm_backward(const float* x, const Shape5d& xs, const float* mean, const float* var,
                        const float* gamma, float eps, const float* dy, float* dx,
                        float* dgamma, float* dbeta);

// ---- Pooling -----------------------------------------------------------------

// Max pool; argmax stores flat offsets into the (T,H,W) volume per (n,c).
void maxpool3d_forward(const float* x, const Shape5d& xs, int kt, int kh, int kw, int st,
                       int sh, int sw, int pt, int ph, int pw, float* y, int64_t* argmax,
                       const Shape5d& ys);
void maxpool3d_backward(const float* dy, const Shape5d& ys, const int64_t* argmax,
                        float* dx, const Shape5d& xs);

// (N,C,T,H,W) -> (N,C)
void global_avgpool_forward(const float* x, const Shape5d& xs, float* y);
void global_avgpool_backward(const float* dy, const Shape5d& xs, float* dx);

// ---- Elementwise ----------------------------------------------------------------

void relu_forward(const float* x, int64_t n, float* y);
// dx = dy where y_forward > 0 (mask taken from the forward output).
void relu_backward(const float* y, const float* dy, int64_t n, float* dx);

void add_inplace(float* dst, const float* src, int64_t n);

// ---- Adam -----------------------------------------------------------------------

void adam_step(float* param, const float* grad, float* m, float* v, int64_t n, float lr,
               float beta1, float beta2, float eps, int64_t t);

}  // namespace exnet::kernels
