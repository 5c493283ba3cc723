// Reference implementations: plain loops, no parallelism, no im2col.
// Tests compare the parallel backend against these.

#include "exnet/core/kernels.hpp"
#include "kernels_detail.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace exnet::kernels::detail::serial {

void gemm_nn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = accumulate ? c[i * n + j] : 0.0;
            for (int64_t l = 0; l < k; ++l) acc += double(a[i * k + l]) * double(b[l * n + j]);
            c[i * n + j] = float(acc);
        }
    }
}

void gemm_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = accumulate ? c[i * n + j] : 0.0;
            for (int64_t l = 0; l < k; ++l) acc += double(a[i * k + l]) * double(b[j * k + l]);
            c[i * n + j] = float(acc);
        }
    }
}

void gemm_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
             bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = accumulate ? c[i * n + j] : 0.0;
            for (int64_t l = 0; l < k; ++l) acc += double(a[l * m + i]) * double(b[l * n + j]);
            c[i * n + j] = float(acc);
        }
    }
}

void conv3d_forward(const Conv3dSpec& s, const float* x, const Shape5d& xs, const float* w,
                    float* y) {
    const Shape5d ys = conv3d_output_shape(s, xs);
    const int64_t cpg_in = s.in_c / s.groups;
    const int64_t cpg_out = s.out_c / s.groups;
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t oc = 0; oc < s.out_c; ++oc) {
            const int64_t g = oc / cpg_out;
            for (int64_t ot = 0; ot < ys.t; ++ot)
                for (int64_t oh = 0; oh < ys.h; ++oh)
                    for (int64_t ow = 0; ow < ys.w; ++ow) {
                        double acc = 0.0;
                        for (int64_t ic = 0; ic < cpg_in; ++ic) {
                            const int64_t c = g * cpg_in + ic;
                            for (int kt = 0; kt < s.kt; ++kt) {
                                const int64_t it = ot * s.st - s.pt + kt;
                                if (it < 0 || it >= xs.t) continue;
                                for (int kh = 0; kh < s.kh; ++kh) {
                                    const int64_t ih = oh * s.sh - s.ph + kh;
                                    if (ih < 0 || ih >= xs.h) continue;
                                    for (int kw = 0; kw < s.kw; ++kw) {
                                        const int64_t iw = ow * s.sw - s.pw + kw;
                                        if (iw < 0 || iw >= xs.w) continue;
                                        const float xv =
                                            x[(((n * xs.c + c) * xs.t + it) * xs.h + ih) * xs.w + iw];
                                        const float wv =
                                            w[(((oc * cpg_in + ic) * s.kt + kt) * s.kh + kh) * s.kw + kw];
                                        acc += double(xv) * double(wv);
                                    }
                                }
                            }
                        }
                        y[(((n * s.out_c + oc) * ys.t + ot) * ys.h + oh) * ys.w + ow] = float(acc);
                    }
        }
}

void conv3d_backward_input(const Conv3dSpec& s, const float* dy, const Shape5d& xs,
                           const float* w, float* dx) {
    const Shape5d ys = conv3d_output_shape(s, xs);
    const int64_t cpg_in = s.in_c / s.groups;
    const int64_t cpg_out = s.out_c / s.groups;
    std::fill(dx, dx + xs.numel(), 0.0f);
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t oc = 0; oc < s.out_c; ++oc) {
            const int64_t g = oc / cpg_out;
            for (int64_t ot = 0; ot < ys.t; ++ot)
                for (int64_t oh = 0; oh < ys.h; ++oh)
                    for (int64_t ow = 0; ow < ys.w; ++ow) {
                        const float g_out =
                            dy[(((n * s.out_c + oc) * ys.t + ot) * ys.h + oh) * ys.w + ow];
                        for (int64_t ic = 0; ic < cpg_in; ++ic) {
                            const int64_t c = g * cpg_in + ic;
                            for (int kt = 0; kt < s.kt; ++kt) {
                                const int64_t it = ot * s.st - s.pt + kt;
                                if (it < 0 || it >= xs.t) continue;
                                for (int kh = 0; kh < s.kh; ++kh) {
                                    const int64_t ih = oh * s.sh - s.ph + kh;
                                    if (ih < 0 || ih >= xs.h) continue;
                                    for (int kw = 0; kw < s.kw; ++kw) {
                                        const int64_t iw = ow * s.sw - s.pw + kw;
                                        if (iw < 0 || iw >= xs.w) continue;
                                        dx[(((n * xs.c + c) * xs.t + it) * xs.h + ih) * xs.w + iw] +=
                                            g_out *
                                            w[(((oc * cpg_in + ic) * s.kt + kt) * s.kh + kh) * s.kw + kw];
                                    }
                                }
                            }
                        }
                    }
        }
}

void conv3d_backward_weight(const Conv3dSpec& s, const float* x, const Shape5d& xs,
                            const float* dy, float* dw) {
    const Shape5d ys = conv3d_output_shape(s, xs);
    const int64_t cpg_in = s.in_c / s.groups;
    const int64_t cpg_out = s.out_c / s.groups;
    for (int64_t oc = 0; oc < s.out_c; ++oc) {
        const int64_t g = oc / cpg_out;
        for (int64_t ic = 0; ic < cpg_in; ++ic) {
            const int64_t c = g * cpg_in + ic;
            for (int kt = 0; kt < s.kt; ++kt)
                for (int kh = 0; kh < s.kh; ++kh)
                    for (int kw = 0; kw < s.kw; ++kw) {
                        double acc = 0.0;
                        for (int64_t n = 0; n < xs.n; ++n)
                            for (int64_t ot = 0; ot < ys.t; ++ot) {
                                const int64_t it = ot * s.st - s.pt + kt;
                                if (it < 0 || it >= xs.t) continue;
                                for (int64_t oh = 0; oh < ys.h; ++oh) {
                                    const int64_t ih = oh * s.sh - s.ph + kh;
                                    if (ih < 0 || ih >= xs.h) continue;
                                    for (int64_t ow = 0; ow < ys.w; ++ow) {
                                        const int64_t iw = ow * s.sw - s.pw + kw;
                                        if (iw < 0 || iw >= xs.w) continue;
                                        acc +=
                                            double(x[(((n * xs.c + c) * xs.t + it) * xs.h + ih) * xs.w +
                                                     iw]) *
                                            double(dy[(((n * s.out_c + oc) * ys.t + ot) * ys.h + oh) *
                                                          ys.w +
                                                      ow]);
                                    }
                                }
                            }
                        dw[(((oc * cpg_in + ic) * s.kt + kt) * s.kh + kh) * s.kw + kw] += float(acc);
                    }
        }
    }
}

void batchnorm_stats(const float* x, const Shape5d& xs, float* mean, float* var) {
    const int64_t spatial = xs.t * xs.h * xs.w;
    const int64_t count = xs.n * spatial;
    for (int64_t c = 0; c < xs.c; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int64_t n = 0; n < xs.n; ++n) {
            const float* p = x + (n * xs.c + c) * spatial;
            for (int64_t i = 0; i < spatial; ++i) {
                sum += p[i];
                sq += double(p[i]) * double(p[i]);
            }
        }
        const double mu = sum / double(count);
        mean[c] = float(mu);
        var[c] = float(sq / double(count) - mu * mu);
        if (var[c] < 0.0f) var[c] = 0.0f;
    }
}

void batchnorm_forward(const float* x, const Shape5d& xs, const float* mean, const float* var,
                       const float* gamma, const float* beta, float eps, float* y) {
    const int64_t spatial = xs.t * xs.h * xs.w;
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t c = 0; c < xs.c; ++c) {
            const float inv = 1.0f / std::sqrt(var[c] + eps);
            const float* px = x + (n * xs.c + c) * spatial;
            float* py = y + (n * xs.c + c) * spatial;
            for (int64_t i = 0; i < spatial; ++i)
                py[i] = gamma[c] * (px[i] - mean[c]) * inv + beta[c];
        }
}

void batchnorm_backward(const float* x, const Shape5d& xs, const float* mean, const float* var,
                        const float* gamma, float eps, const float* dy, float* dx,
                        float* dgamma, float* dbeta) {
    const int64_t spatial = xs.t * xs.h * xs.w;
    const int64_t count = xs.n * spatial;
    for (int64_t c = 0; c < xs.c; ++c) {
        const double inv = 1.0 / std::sqrt(double(var[c]) + double(eps));
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t n = 0; n < xs.n; ++n) {
            const float* px = x + (n * xs.c + c) * spatial;
            const float* pdy = dy + (n * xs.c + c) * spatial;
            for (int64_t i = 0; i < spatial; ++i) {
                const double xhat = (double(px[i]) - double(mean[c])) * inv;
                sum_dy += pdy[i];
                sum_dy_xhat += double(pdy[i]) * xhat;
            }
        }
        dgamma[c] += float(sum_dy_xhat);
        dbeta[c] += float(sum_dy);
        const double scale = double(gamma[c]) * inv / double(count);
        for (int64_t n = 0; n < xs.n; ++n) {
            const float* px = x + (n * xs.c + c) * spatial;
            const float* pdy = dy + (n * xs.c + c) * spatial;
            float* pdx = dx + (n * xs.c + c) * spatial;
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
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t c = 0; c < xs.c; ++c) {
            const float* px = x + (n * xs.c + c) * xs.t * xs.h * xs.w;
            float* py = y + (n * ys.c + c) * ys.t * ys.h * ys.w;
            int64_t* pa = argmax + (n * ys.c + c) * ys.t * ys.h * ys.w;
            for (int64_t ot = 0; ot < ys.t; ++ot)
                for (int64_t oh = 0; oh < ys.h; ++oh)
                    for (int64_t ow = 0; ow < ys.w; ++ow) {
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
                        const int64_t o = (ot * ys.h + oh) * ys.w + ow;
                        py[o] = best;
                        pa[o] = best_idx;
                    }
        }
}

void maxpool3d_backward(const float* dy, const Shape5d& ys, const int64_t* argmax, float* dx,
                        const Shape5d& xs) {
    std::fill(dx, dx + xs.numel(), 0.0f);
    const int64_t ovol = ys.t * ys.h * ys.w;
    const int64_t ivol = xs.t * xs.h * xs.w;
    for (int64_t n = 0; n < ys.n; ++n)
        for (int64_t c = 0; c < ys.c; ++c) {
            const float* pdy = dy + (n * ys.c + c) * ovol;
            const int64_t* pa = argmax + (n * ys.c + c) * ovol;
            float* pdx = dx + (n * xs.c + c) * ivol;
            for (int64_t o = 0; o < ovol; ++o)
                if (pa[o] >= 0) pdx[pa[o]] += pdy[o];
        }
}

void global_avgpool_forward(const float* x, const Shape5d& xs, float* y) {
    const int64_t vol = xs.t * xs.h * xs.w;
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t c = 0; c < xs.c; ++c) {
            double acc = 0.0;
            const float* p = x + (n * xs.c + c) * vol;
            for (int64_t i = 0; i < vol; ++i) acc += p[i];
            y[n * xs.c + c] = float(acc / double(vol));
        }
}

void global_avgpool_backward(const float* dy, const Shape5d& xs, float* dx) {
    const int64_t vol = xs.t * xs.h * xs.w;
    for (int64_t n = 0; n < xs.n; ++n)
        for (int64_t c = 0; c < xs.c; ++c) {
            const float g = dy[n * xs.c + c] / float(vol);
            float* p = dx + (n * xs.c + c) * vol;
            for (int64_t i = 0; i < vol; ++i) p[i] = g;
        }
}

void relu_forward(const float* x, int64_t n, float* y) {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* y, const float* dy, int64_t n, float* dx) {
    for (int64_t i = 0; i < n; ++i) dx[i] = y[i] > 0.0f ? dy[i] : 0.0f;
}

void add_inplace(float* dst, const float* src, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

void adam_step(float* param, const float* grad, float* m, float* v, int64_t n, float lr,
               float beta1, float beta2, float eps, int64_t t) {
    const double bc1 = 1.0 - std::pow(double(beta1), double(t));
    const double bc2 = 1.0 - std::pow(double(beta2), double(t));
    for (int64_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * grad[i] * grad[i];
        const double mhat = double(m[i]) / bc1;
        const double vhat = double(v[i]) / bc2;
        param[i] -= float(double(lr) * mhat / (std::sqrt(vhat) + double(eps)));
    }
}

}  // namespace exnet::kernels::detail::serial
