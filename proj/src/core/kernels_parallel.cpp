// Production backend: OpenMP loops, saxpy-style GEMM, im2col-backed
// convolutions with fast paths for pointwise and grouped kernels.
//
// Every output element is accumulated by exactly one thread in a fixed
// order, so results are bitwise reproducible for any OMP_NUM_THREADS.

#include "exnet/core/kernels.hpp"
#include "kernels_detail.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

namespace exnet::kernels::detail::parallel {

void gemm_nn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        float* ci = c + i * n;
        if (!accumulate) std::fill(ci, ci + n, 0.0f);
        const float* ai = a + i * k;
        for (int64_t l = 0; l < k; ++l) {
            const float av = ai[l];
            const float* bl = b + l * n;
#pragma omp simd
            for (int64_t j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    }
}

void gemm_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const float* bj = b + j * k;
            float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
            for (int64_t l = 0; l < k; ++l) acc += ai[l] * bj[l];
            ci[j] = accumulate ? ci[j] + acc : acc;
        }
    }
}

void gemm_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        float* ci = c + i * n;
        if (!accumulate) std::fill(ci, ci + n, 0.0f);
        for (int64_t l = 0; l < k; ++l) {
            const float av = a[l * m + i];
            const float* bl = b + l * n;
#pragma omp simd
            for (int64_t j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    }
}

namespace {

bool is_pointwise(const Conv3dSpec& s) {
    return s.kt == 1 && s.kh == 1 && s.kw == 1 && s.st == 1 && s.sh == 1 && s.sw == 1 &&
           s.pt == 0 && s.ph == 0 && s.pw == 0;
}

// col has (Cin*kvol) rows and (To*Ho*Wo) columns; row index is
// ((ic*kt + a)*kh + b)*kw + d.
void im2col(const Conv3dSpec& s, const float* x, const Shape5d& xs, const Shape5d& ys,
            float* col) {
    const int64_t cols = ys.t * ys.h * ys.w;
#pragma omp parallel for schedule(static)
    for (int64_t ic = 0; ic < xs.c; ++ic) {
        const float* px = x + ic * xs.t * xs.h * xs.w;
        for (int a = 0; a < s.kt; ++a)
            for (int b = 0; b < s.kh; ++b)
                for (int d = 0; d < s.kw; ++d) {
                    float* row = col + (((ic * s.kt + a) * s.kh + b) * s.kw + d) * cols;
                    int64_t o = 0;
                    for (int64_t ot = 0; ot < ys.t; ++ot) {
                        const int64_t it = ot * s.st - s.pt + a;
                        const bool t_ok = it >= 0 && it < xs.t;
                        for (int64_t oh = 0; oh < ys.h; ++oh) {
                            const int64_t ih = oh * s.sh - s.ph + b;
                            const bool h_ok = ih >= 0 && ih < xs.h;
                            if (!t_ok || !h_ok) {
                                for (int64_t ow = 0; ow < ys.w; ++ow) row[o++] = 0.0f;
                                continue;
                            }
                            const float* src = px + (it * xs.h + ih) * xs.w;
                            for (int64_t ow = 0; ow < ys.w; ++ow) {
                                const int64_t iw = ow * s.sw - s.pw + d;
                                row[o++] = (iw >= 0 && iw < xs.w) ? src[iw] : 0.0f;
                            }
                        }
                    }
                }
    }
}

// Scatter-add of a col-layout gradient back into dx; parallel over input
// channels so writes never collide.
void col2im_add(const Conv3dSpec& s, const float* col, const Shape5d& xs, const Shape5d& ys,
                float* dx) {
    const int64_t cols = ys.t * ys.h * ys.w;
#pragma omp parallel for schedule(static)
    for (int64_t ic = 0; ic < xs.c; ++ic) {
        float* px = dx + ic * xs.t * xs.h * xs.w;
        for (int a = 0; a < s.kt; ++a)
            for (int b = 0; b < s.kh; ++b)
                for (int d = 0; d < s.kw; ++d) {
                    const float* row = col + (((ic * s.kt + a) * s.kh + b) * s.kw + d) * cols;
                    int64_t o = 0;
                    for (int64_t ot = 0; ot < ys.t; ++ot) {
                        const int64_t it = ot * s.st - s.pt + a;
                        const bool t_ok = it >= 0 && it < xs.t;
                        for (int64_t oh = 0; oh < ys.h; ++oh) {
                            const int64_t ih = oh * s.sh - s.ph + b;
                            if (!t_ok || ih < 0 || ih >= xs.h) {
                                o += ys.w;
                                continue;
                            }
                            float* dst = px + (it * xs.h + ih) * xs.w;
                            for (int64_t ow = 0; ow < ys.w; ++ow, ++o) {
                                const int64_t iw = ow * s.sw - s.pw + d;
                                if (iw >= 0 && iw < xs.w) dst[iw] += row[o];
                            }
                        }
                    }
                }
    }
}

// Direct grouped convolution paths (used for depthwise center convs).
void grouped_forward(const Conv3dSpec& s, const float* x, const Shape5d& xs, const float* w,
                     float* y, const Shape5d& ys) {
    const int64_t cpg_in = s.in_c / s.groups;
    const int64_t cpg_out = s.out_c / s.groups;
    const int64_t ovol = ys.t * ys.h * ys.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t oc = 0; oc < s.out_c; ++oc) {
            const int64_t g = oc / cpg_out;
            float* py = y + (n * s.out_c + oc) * ovol;
            std::fill(py, py + ovol, 0.0f);
            for (int64_t ic = 0; ic < cpg_in; ++ic) {
                const int64_t c = g * cpg_in + ic;
                const float* px = x + (n * xs.c + c) * xs.t * xs.h * xs.w;
                const float* pw = w + (oc * cpg_in + ic) * s.kt * s.kh * s.kw;
                int64_t o = 0;
                for (int64_t ot = 0; ot < ys.t; ++ot)
                    for (int64_t oh = 0; oh < ys.h; ++oh)
                        for (int64_t ow = 0; ow < ys.w; ++ow, ++o) {
                            float acc = 0.0f;
                            for (int a = 0; a < s.kt; ++a) {
                                const int64_t it = ot * s.st - s.pt + a;
                                if (it < 0 || it >= xs.t) continue;
                                for (int b = 0; b < s.kh; ++b) {
                                    const int64_t ih = oh * s.sh - s.ph + b;
                                    if (ih < 0 || ih >= xs.h) continue;
                                    const float* src = px + (it * xs.h + ih) * xs.w;
                                    const float* wk = pw + (a * s.kh + b) * s.kw;
                                    for (int d = 0; d < s.kw; ++d) {
                                        const int64_t iw = ow * s.sw - s.pw + d;
                                        if (iw >= 0 && iw < xs.w) acc += src[iw] * wk[d];
                                    }
                                }
                            }
                            py[o] += acc;
                        }
            }
        }
}

void grouped_backward_input(const Conv3dSpec& s, const float* dy, const Shape5d& xs,
                            const float* w, float* dx, const Shape5d& ys) {
    const int64_t cpg_in = s.in_c / s.groups;
    const int64_t cpg_out = s.out_c / s.groups;
    const int64_t ivol = xs.t * xs.h * xs.w;
    const int64_t ovol = ys.t * ys.h * ys.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t c = 0; c < xs.c; ++c) {
            const int64_t g = c / cpg_in;
            const int64_t ic = c % cpg_in;
            float* pdx = dx + (n * xs.c + c) * ivol;
            std::fill(pdx, pdx + ivol, 0.0f);
            for (int64_t ocg = 0; ocg < cpg_out; ++ocg) {
                const int64_t oc = g * cpg_out + ocg;
                const float* pdy = dy + (n * s.out_c + oc) * ovol;
                const float* pw = w + (oc * cpg_in + ic) * s.kt * s.kh * s.kw;
                int64_t o = 0;
                for (int64_t ot = 0; ot < ys.t; ++ot)
                    for (int64_t oh = 0; oh < ys.h; ++oh)
                        for (int64_t ow = 0; ow < ys.w; ++ow, ++o) {
                            const float g_out = pdy[o];
                            if (g_out == 0.0f) continue;
                            for (int a = 0; a < s.kt; ++a) {
                                const int64_t it = ot * s.st - s.pt + a;
                                if (it < 0 || it >= xs.t) continue;
                                for (int b = 0; b < s.kh; ++b) {
                                    const int64_t ih = oh * s.sh - s.ph + b;
                                    if (ih < 0 || ih >= xs.h) continue;
                                    float* dst = pdx + (it * xs.h + ih) * xs.w;
                                    const float* wk = pw + (a * s.kh + b) * s.kw;
                                    for (int d = 0; d < s.kw; ++d) {
                                        const int64_t iw = ow * s.sw - s.pw + d;
                                        if (iw >= 0 && iw < xs.w) dst[iw] += g_out * wk[d];
                                    }
                                }
                            }
                        }
            }
        }
}

void grouped_backward_weight(const Conv3dSpec& s, const float* x, const Shape5d& xs,
                             const float* dy, float* dw, const Shape5d& ys) {
    const int64_t cpg_in = s.in_c / s.groups;
    const int64_t cpg_out = s.out_c / s.groups;
    const int64_t ivol = xs.t * xs.h * xs.w;
    const int64_t ovol = ys.t * ys.h * ys.w;
#pragma omp parallel for schedule(static)
    for (int64_t oc = 0; oc < s.out_c; ++oc) {
        const int64_t g = oc / cpg_out;
        for (int64_t ic = 0; ic < cpg_in; ++ic) {
            const int64_t c = g * cpg_in + ic;
            float* pw = dw + (oc * cpg_in + ic) * s.kt * s.kh * s.kw;
            for (int64_t n = 0; n < xs.n; ++n) {
                const float* px = x + (n * xs.c + c) * ivol;
                const float* pdy = dy + (n * s.out_c + oc) * ovol;
                int64_t o = 0;
                for (int64_t ot = 0; ot < ys.t; ++ot)
                    for (int64_t oh = 0; oh < ys.h; ++oh)
                        for (int64_t ow = 0; ow < ys.w; ++ow, ++o) {
                            const float g_out = pdy[o];
                            if (g_out == 0.0f) continue;
                            for (int a = 0; a < s.kt; ++a) {
                                const int64_t it = ot * s.st - s.pt + a;
                                if (it < 0 || it >= xs.t) continue;
                                for (int b = 0; b < s.kh; ++b) {
                                    const int64_t ih = oh * s.sh - s.ph + b;
                                    if (ih < 0 || ih >= xs.h) continue;
                                    const float* src = px + (it * xs.h + ih) * xs.w;
                                    float* wk = pw + (a * s.kh + b) * s.kw;
                                    for (int d = 0; d < s.kw; ++d) {
                                        const int64_t iw = ow * s.sw - s.pw + d;
                                        if (iw >= 0 && iw < xs.w) wk[d] += g_out * src[iw];
                                    }
                                }
                            }
                        }
            }
        }
    }
}

}  // namespace

void conv3d_forward(const Conv3dSpec& s, const float* x, const Shape5d& xs, const float* w,
                    float* y) {
    const Shape5d ys = conv3d_output_shape(s, xs);
    if (s.groups > 1) {
        grouped_forward(s, x, xs, w, y, ys);
        return;
    }
    const int64_t cols = ys.t * ys.h * ys.w;
    if (is_pointwise(s)) {
        for (int64_t n = 0; n < xs.n; ++n)
            gemm_nn(w, x + n * xs.c * cols, y + n * s.out_c * cols, s.out_c, s.in_c, cols, false);
        return;
    }
    const int64_t krows = s.in_c * s.kt * s.kh * s.kw;
    std::vector<float> col(static_cast<size_t>(krows * cols));
    for (int64_t n = 0; n < xs.n; ++n) {
        im2col(s, x + n * xs.c * xs.t * xs.h * xs.w, xs, ys, col.data());
        gemm_nn(w, col.data(), y + n * s.out_c * cols, s.out_c, krows, cols, false);
    }
}

void conv3d_backward_input(const Conv3dSpec& s, const float* dy, const Shape5d& xs,
                           const float* w, float* dx) {
    const Shape5d ys = conv3d_output_shape(s, xs);
    if (s.groups > 1) {
        grouped_backward_input(s, dy, xs, w, dx, ys);
        return;
    }
    const int64_t cols = ys.t * ys.h * ys.w;
    if (is_pointwise(s)) {
        for (int64_t n = 0; n < xs.n; ++n)
            gemm_tn(w, dy + n * s.out_c * cols, dx + n * xs.c * cols, s.in_c, s.out_c, cols,
                    false);
        return;
    }
    const int64_t krows = s.in_c * s.kt * s.kh * s.kw;
    std::vector<float> col(static_cast<size_t>(krows * cols));
    std::fill(dx, dx + xs.numel(), 0.0f);
    for (int64_t n = 0; n < xs.n; ++n) {
        gemm_tn(w, dy + n * s.out_c * cols, col.data(), krows, s.out_c, cols, false);
        col2im_add(s, col.data(), xs, ys, dx + n * xs.c * xs.t * xs.h * xs.w);
    }
}

void conv3d_backward_weight(const Conv3dSpec& s, const float* x, const Shape5d& xs,
                            const float* dy, float* dw) {
    const Shape5d ys = conv3d_output_shape(s, xs);
    if (s.groups > 1) {
        grouped_backward_weight(s, x, xs, dy, dw, ys);
        return;
    }
    const int64_t cols = ys.t * ys.h * ys.w;
    if (is_pointwise(s)) {
        for (int64_t n = 0; n < xs.n; ++n)
            gemm_nt(dy + n * s.out_c * cols, x + n * xs.c * cols, dw, s.out_c, cols, s.in_c,
                    true);
        return;
    }
    const int64_t krows = s.in_c * s.kt * s.kh * s.kw;
    std::vector<float> col(static_cast<size_t>(krows * cols));
    for (int64_t n = 0; n < xs.n; ++n) {
        im2col(s, x + n * xs.c * xs.t * xs.h * xs.w, xs, ys, col.data());
        gemm_nt(dy + n * s.out_c * cols, col.data(), dw, s.out_c, cols, krows, true);
    }
}

void batchnorm_stats(const float* x, const Shape5d& xs, float* mean, float* var) {
    const int64_t spatial = xs.t * xs.h * xs.w;
    const int64_t count = xs.n * spatial;
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < xs.c; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int64_t n = 0; n < xs.n; ++n) {
            const float* p = x + (n * xs.c + c) * spatial;
#pragma omp simd reduction(+ : sum, sq)
            for (int64_t i = 0; i < spatial; ++i) {
                sum += p[i];
                sq += double(p[i]) * double(p[i]);
            }
        }
        const double mu = sum / double(count);
        mean[c] = float(mu);
        var[c] = std::max(0.0f, float(sq / double(count) - mu * mu));
    }
}

void batchnorm_forward(const float* x, const Shape5d& xs, const float* mean, const float* var,
                       const float* gamma, const float* beta, float eps, float* y) {
    const int64_t spatial = xs.t * xs.h * xs.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t c = 0; c < xs.c; ++c) {
            const float inv = 1.0f / std::sqrt(var[c] + eps);
            const float scale = gamma[c] * inv;
            const float shift = beta[c] - scale * mean[c];
            const float* px = x + (n * xs.c + c) * spatial;
            float* py = y + (n * xs.c + c) * spatial;
#pragma omp simd
            for (int64_t i = 0; i < spatial; ++i) py[i] = scale * px[i] + shift;
        }
}

void batchnorm_backward(const float* x, const Shape5d& xs, const float* mean, const float* var,
                        const float* gamma, float eps, const float* dy, float* dx,
                        float* dgamma, float* dbeta) {
    const int64_t spatial = xs.t * xs.h * xs.w;
    const int64_t count = xs.n * spatial;
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < xs.c; ++c) {
        const double inv = 1.0 / std::sqrt(double(var[c]) + double(eps));
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t n = 0; n < xs.n; ++n) {
            const float* px = x + (n * xs.c + c) * spatial;
            const float* pdy = dy + (n * xs.c + c) * spatial;
#pragma omp simd reduction(+ : sum_dy, sum_dy_xhat)
            for (int64_t i = 0; i < spatial; ++i) {
                sum_dy += pdy[i];
                sum_dy_xhat += double(pdy[i]) * (double(px[i]) - double(mean[c])) * inv;
            }
        }
        dgamma[c] += float(sum_dy_xhat);
        dbeta[c] += float(sum_dy);
        const double scale = double(gamma[c]) * inv / double(count);
        for (int64_t n = 0; n < xs.n; ++n) {
            const float* px = x + (n * xs.c + c) * spatial;
            const float* pdy = dy + (n * xs.c + c) * spatial;
            float* pdx = dx + (n * xs.c + c) * spatial;
#pragma omp simd
            for (int64_t i = 0; i < spatial; ++i) {
                const double xhat = (double(px[i]) - double(mean[c])) * inv;
                pdx[i] = float(scale * (double(count) * double(pdy[i]) - sum_dy - xhat * sum_dy_xhat));
            }
        }
    }
}

void maxpool3d_forward(const float* x, const Shape5d& xs, int kt, int kh, int kw, int st,
                       int sh, int sw, int pt, int ph, int pw, float* y, int64_t* argmax,
                       const Shape5d& ys) {
    const int64_t ivol = xs.t * xs.h * xs.w;
    const int64_t ovol = ys.t * ys.h * ys.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t c = 0; c < xs.c; ++c) {
            const float* px = x + (n * xs.c + c) * ivol;
            float* py = y + (n * ys.c + c) * ovol;
            int64_t* pa = argmax + (n * ys.c + c) * ovol;
            int64_t o = 0;
            for (int64_t ot = 0; ot < ys.t; ++ot)
                for (int64_t oh = 0; oh < ys.h; ++oh)
                    for (int64_t ow = 0; ow < ys.w; ++ow, ++o) {
                        float best = -std::numeric_limits<float>::infinity();
                        int64_t best_idx = -1;
                        for (int a = 0; a < kt; ++a) {
                            const int64_t it = ot * st - pt + a;
                            if (it < 0 || it >= xs.t) continue;
                            for (int b = 0; b < kh; ++b) {
                                const int64_t ih = oh * sh - ph + b;
                                if (ih < 0 || ih >= xs.h) continue;
                                for (int d = 0; d < kw; ++d) {
                                    const int64_t iw = ow * sw - pw + d;
                                    if (iw < 0 || iw >= xs.w) continue;
                                    const int64_t idx = (it * xs.h + ih) * xs.w + iw;
                                    if (px[idx] > best) {
                                        best = px[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                        }
                        py[o] = best;
                        pa[o] = best_idx;
                    }
        }
}

void maxpool3d_backward(const float* dy, const Shape5d& ys, const int64_t* argmax, float* dx,
                        const Shape5d& xs) {
    const int64_t ovol = ys.t * ys.h * ys.w;
    const int64_t ivol = xs.t * xs.h * xs.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < ys.n; ++n)
        for (int64_t c = 0; c < ys.c; ++c) {
            const float* pdy = dy + (n * ys.c + c) * ovol;
            const int64_t* pa = argmax + (n * ys.c + c) * ovol;
            float* pdx = dx + (n * xs.c + c) * ivol;
            std::fill(pdx, pdx + ivol, 0.0f);
            for (int64_t o = 0; o < ovol; ++o)
                if (pa[o] >= 0) pdx[pa[o]] += pdy[o];
        }
}

void global_avgpool_forward(const float* x, const Shape5d& xs, float* y) {
    const int64_t vol = xs.t * xs.h * xs.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t c = 0; c < xs.c; ++c) {
            const float* p = x + (n * xs.c + c) * vol;
            double acc = 0.0;
#pragma omp simd reduction(+ : acc)
            for (int64_t i = 0; i < vol; ++i) acc += p[i];
            y[n * xs.c + c] = float(acc / double(vol));
        }
}

void global_avgpool_backward(const float* dy, const Shape5d& xs, float* dx) {
    const int64_t vol = xs.t * xs.h * xs.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t c = 0; c < xs.c; ++c) {
            const float g = dy[n * xs.c + c] / float(vol);
            float* p = dx + (n * xs.c + c) * vol;
#pragma omp simd
            for (int64_t i = 0; i < vol; ++i) p[i] = g;
        }
}

void relu_forward(const float* x, int64_t n, float* y) {
#pragma omp parallel for simd schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* y, const float* dy, int64_t n, float* dx) {
#pragma omp parallel for simd schedule(static)
    for (int64_t i = 0; i < n; ++i) dx[i] = y[i] > 0.0f ? dy[i] : 0.0f;
}

void add_inplace(float* dst, const float* src, int64_t n) {
#pragma omp parallel for simd schedule(static)
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

void adam_step(float* param, const float* grad, float* m, float* v, int64_t n, float lr,
               float beta1, float beta2, float eps, int64_t t) {
    const double bc1 = 1.0 - std::pow(double(beta1), double(t));
    const double bc2 = 1.0 - std::pow(double(beta2), double(t));
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * grad[i] * grad[i];
        const double mhat = double(m[i]) / bc1;
        const double vhat = double(v[i]) / bc2;
        param[i] -= float(double(lr) * mhat / (std::sqrt(vhat) + double(eps)));
    }
}

}  // namespace exnet::kernels::detail::parallel
