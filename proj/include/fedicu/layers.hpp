#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fedicu/errors.hpp"
#include "fedicu/tensor.hpp"

// Forward and exact analytic backward passes for every layer the models need.
// Sequence tensors inside the recurrent stack are laid out [T, B, F] so each
// timestep is a contiguous [B, F] block; batch inputs arrive as [B, T, F].

namespace fedicu {

namespace detail {

// C[M,N] += A[M,K] * B[K,N]
inline void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
                     std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[K,N] += A^T * B where A is [M,K], B is [M,N]
inline void gemm_at_b_acc(const double* a, const double* b, double* c, std::size_t m,
                          std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[M,N] += A[M,K] * B^T where B is [N,K]
inline void gemm_a_bt_acc(const double* a, const double* b, double* c, std::size_t m,
                          std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bcol = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * bcol[p];
            crow[j] += acc;
        }
    }
}

inline void add_row_bias(double* x, const double* b, std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = x + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += b[j];
    }
}

inline void col_sum_acc(const double* x, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = x + i * cols;
        for (std::size_t j = 0; j < cols; ++j) out[j] += row[j];
    }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// ---------------------------------------------------------------------------
// dense: y = x W + b
// ---------------------------------------------------------------------------

struct DenseCache {
    Tensor x;  // [B, in]
};

inline Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                            DenseCache* cache = nullptr) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(0) ||
        w.dim(1) != b.dim(0)) {
        throw ConfigError("dense: shape mismatch");
    }
    const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(1);
    Tensor y({batch, out});
    detail::gemm_acc(x.data.data(), w.data.data(), y.data.data(), batch, in, out);
    detail::add_row_bias(y.data.data(), b.data.data(), batch, out);
    if (cache) cache->x = x;
    return y;
}

// dw/db accumulate; dx is overwritten.
inline void dense_backward(const DenseCache& cache, const Tensor& w, const Tensor& dy,
                           Tensor* dx, Tensor& dw, Tensor& db) {
    const std::size_t batch = cache.x.dim(0), in = cache.x.dim(1), out = w.dim(1);
    detail::gemm_at_b_acc(cache.x.data.data(), dy.data.data(), dw.data.data(), batch, in, out);
    detail::col_sum_acc(dy.data.data(), db.data.data(), batch, out);
    if (dx) {
        *dx = Tensor({batch, in});
        detail::gemm_a_bt_acc(dy.data.data(), w.data.data(), dx->data.data(), batch, out, in);
    }
}

// ---------------------------------------------------------------------------
// relu / sigmoid (element-wise)
// ---------------------------------------------------------------------------

struct ReluCache {
    Tensor x;
};

inline Tensor relu_forward(const Tensor& x, ReluCache* cache = nullptr) {
    Tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    if (cache) cache->x = x;
    return y;
}

inline Tensor relu_backward(const ReluCache& cache, const Tensor& dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
        if (cache.x.data[i] <= 0.0) dx.data[i] = 0.0;
    }
    return dx;
}

struct SigmoidCache {
    Tensor y;
};

inline Tensor sigmoid_forward(const Tensor& x, SigmoidCache* cache = nullptr) {
    Tensor y = x;
    for (double& v : y.data) v = detail::sigmoid(v);
    if (cache) cache->y = y;
    return y;
}

inline Tensor sigmoid_backward(const SigmoidCache& cache, const Tensor& dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
        const double s = cache.y.data[i];
        dx.data[i] *= s * (1.0 - s);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// conv1d, valid padding, stride 1. x [B,T,F], kernel [k,F,O], bias [O].
// ---------------------------------------------------------------------------

struct Conv1dCache {
    Tensor x;
};

inline Tensor conv1d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                             Conv1dCache* cache = nullptr) {
    if (x.rank() != 3 || kernel.rank() != 3 || bias.rank() != 1 ||
        x.dim(2) != kernel.dim(1) || kernel.dim(2) != bias.dim(0)) {
        throw ConfigError("conv1d: shape mismatch");
    }
    const std::size_t batch = x.dim(0), steps = x.dim(1), feat = x.dim(2);
    const std::size_t ksize = kernel.dim(0), filters = kernel.dim(2);
    if (ksize > steps) throw ConfigError("conv1d: kernel longer than input");
    const std::size_t out_steps = steps - ksize + 1;

    Tensor y({batch, out_steps, filters});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < out_steps; ++t) {
            double* yrow = &y(b, t, 0);
            for (std::size_t o = 0; o < filters; ++o) yrow[o] = bias(o);
            for (std::size_t dk = 0; dk < ksize; ++dk) {
                const double* xrow = &x(b, t + dk, 0);
                const double* krow = &kernel(dk, 0, 0);
                for (std::size_t f = 0; f < feat; ++f) {
                    const double xv = xrow[f];
                    const double* kf = krow + f * filters;
                    for (std::size_t o = 0; o < filters; ++o) yrow[o] += xv * kf[o];
                }
            }
        }
    }
    if (cache) cache->x = x;
    return y;
}

inline void conv1d_backward(const Conv1dCache& cache, const Tensor& kernel, const Tensor& dy,
                            Tensor* dx, Tensor& dkernel, Tensor& dbias) {
    const Tensor& x = cache.x;
    const std::size_t batch = x.dim(0), steps = x.dim(1), feat = x.dim(2);
    const std::size_t ksize = kernel.dim(0), filters = kernel.dim(2);
    const std::size_t out_steps = steps - ksize + 1;

    if (dx) *dx = Tensor({batch, steps, feat});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < out_steps; ++t) {
            const double* dyrow = &dy(b, t, 0);
            for (std::size_t o = 0; o < filters; ++o) dbias(o) += dyrow[o];
            for (std::size_t dk = 0; dk < ksize; ++dk) {
                const double* xrow = &x(b, t + dk, 0);
                double* dxrow = dx ? &(*dx)(b, t + dk, 0) : nullptr;
                for (std::size_t f = 0; f < feat; ++f) {
                    const double xv = xrow[f];
                    const double* kf = &kernel(dk, f, 0);
                    double* dkf = &dkernel(dk, f, 0);
                    double acc = 0.0;
                    for (std::size_t o = 0; o < filters; ++o) {
                        dkf[o] += xv * dyrow[o];
                        acc += dyrow[o] * kf[o];
                    }
                    if (dxrow) dxrow[f] += acc;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// batch normalization over the batch dimension of [B,C]. Biased variance is
// used both for normalization and the running update (momentum 0.9).
// ---------------------------------------------------------------------------

struct BatchNormCache {
    Tensor xhat;                  // [B,C]
    std::vector<double> inv_std;  // per column, 1/sqrt(var+eps)
};

inline Tensor batchnorm_forward_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                      Tensor& running_mean, Tensor& running_var,
                                      double momentum, double eps,
                                      BatchNormCache* cache = nullptr) {
    if (x.rank() != 2 || gamma.dim(0) != x.dim(1)) throw ConfigError("batchnorm: shape mismatch");
    const std::size_t batch = x.dim(0), ch = x.dim(1);
    std::vector<double> mean(ch, 0.0), var(ch, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) mean[c] += x(b, c);
    }
    for (double& m : mean) m /= static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            const double d = x(b, c) - mean[c];
            var[c] += d * d;
        }
    }
    for (double& v : var) v /= static_cast<double>(batch);

    Tensor y({batch, ch});
    Tensor xhat({batch, ch});
    std::vector<double> inv_std(ch);
    for (std::size_t c = 0; c < ch; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            const double xh = (x(b, c) - mean[c]) * inv_std[c];
            xhat(b, c) = xh;
            y(b, c) = gamma(c) * xh + beta(c);
        }
    }
    for (std::size_t c = 0; c < ch; ++c) {
        running_mean(c) = momentum * running_mean(c) + (1.0 - momentum) * mean[c];
        running_var(c) = momentum * running_var(c) + (1.0 - momentum) * var[c];
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

// Fixed affine map; batch composition does not matter.
inline Tensor batchnorm_forward_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                     const Tensor& running_mean, const Tensor& running_var,
                                     double eps) {
    if (x.rank() != 2 || gamma.dim(0) != x.dim(1)) throw ConfigError("batchnorm: shape mismatch");
    const std::size_t batch = x.dim(0), ch = x.dim(1);
    Tensor y({batch, ch});
    for (std::size_t c = 0; c < ch; ++c) {
        const double scale = gamma(c) / std::sqrt(running_var(c) + eps);
        const double shift = beta(c) - scale * running_mean(c);
        for (std::size_t b = 0; b < batch; ++b) y(b, c) = scale * x(b, c) + shift;
    }
    return y;
}

inline Tensor batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma,
                                 const Tensor& dy, Tensor& dgamma, Tensor& dbeta) {
    const std::size_t batch = cache.xhat.dim(0), ch = cache.xhat.dim(1);
    std::vector<double> sum_dy(ch, 0.0), sum_dy_xhat(ch, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            sum_dy[c] += dy(b, c);
            sum_dy_xhat[c] += dy(b, c) * cache.xhat(b, c);
        }
    }
    for (std::size_t c = 0; c < ch; ++c) {
        dgamma(c) += sum_dy_xhat[c];
        dbeta(c) += sum_dy[c];
    }
    Tensor dx({batch, ch});
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            dx(b, c) = gamma(c) * cache.inv_std[c] *
                       (dy(b, c) - sum_dy[c] * inv_batch -
                        cache.xhat(b, c) * sum_dy_xhat[c] * inv_batch);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Recurrent layers. h_t = f(x_t, h_{t-1}), zero initial state, full BPTT.
// Weight layout per input matrix: W [F,H], recurrent U [H,H], bias b [H].
// ---------------------------------------------------------------------------

struct FrnnWeights {
    const Tensor *w, *u, *b;
};
struct FrnnGrads {
    Tensor *w, *u, *b;
};

struct FrnnCache {
    Tensor h;  // [T,B,H], post-tanh states
    Tensor x;  // [T,B,F]
};

// h_t = tanh(x_t W + h_{t-1} U + b)
inline Tensor frnn_forward(const Tensor& x, const FrnnWeights& wt, FrnnCache* cache = nullptr) {
    const std::size_t steps = x.dim(0), batch = x.dim(1), feat = x.dim(2);
    const std::size_t hidden = wt.b->dim(0);
    if (wt.w->dim(0) != feat) throw ConfigError("frnn: input width mismatch");

    Tensor h({steps, batch, hidden});
    std::vector<double> a(batch * hidden);
    const double* hprev = nullptr;
    for (std::size_t t = 0; t < steps; ++t) {
        std::fill(a.begin(), a.end(), 0.0);
        detail::gemm_acc(&x(t, 0, 0), wt.w->data.data(), a.data(), batch, feat, hidden);
        if (t > 0) detail::gemm_acc(hprev, wt.u->data.data(), a.data(), batch, hidden, hidden);
        detail::add_row_bias(a.data(), wt.b->data.data(), batch, hidden);
        double* ht = &h(t, 0, 0);
        for (std::size_t i = 0; i < batch * hidden; ++i) ht[i] = std::tanh(a[i]);
        hprev = ht;
    }
    if (cache) {
        cache->h = h;
        cache->x = x;
    }
    return h;
}

inline Tensor frnn_backward(const FrnnCache& cache, const FrnnWeights& wt, const Tensor& dh_seq,
                            const FrnnGrads& g) {
    const std::size_t steps = cache.x.dim(0), batch = cache.x.dim(1), feat = cache.x.dim(2);
    const std::size_t hidden = wt.b->dim(0);
    Tensor dx({steps, batch, feat});
    std::vector<double> dh_next(batch * hidden, 0.0), da(batch * hidden);
    for (std::size_t t = steps; t-- > 0;) {
        const double* ht = &cache.h(t, 0, 0);
        const double* dht_in = &dh_seq(t, 0, 0);
        for (std::size_t i = 0; i < batch * hidden; ++i) {
            const double dh = dht_in[i] + dh_next[i];
            da[i] = dh * (1.0 - ht[i] * ht[i]);
        }
        detail::gemm_a_bt_acc(da.data(), wt.w->data.data(), &dx(t, 0, 0), batch, hidden, feat);
        detail::gemm_at_b_acc(&cache.x(t, 0, 0), da.data(), g.w->data.data(), batch, feat, hidden);
        detail::col_sum_acc(da.data(), g.b->data.data(), batch, hidden);
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        if (t > 0) {
            const double* hprev = &cache.h(t - 1, 0, 0);
            detail::gemm_at_b_acc(hprev, da.data(), g.u->data.data(), batch, hidden, hidden);
            detail::gemm_a_bt_acc(da.data(), wt.u->data.data(), dh_next.data(), batch, hidden,
                                  hidden);
        }
    }
    return dx;
}

struct LstmWeights {
    const Tensor *wi, *ui, *bi, *wf, *uf, *bf, *wo, *uo, *bo, *wg, *ug, *bg;
};
struct LstmGrads {
    Tensor *wi, *ui, *bi, *wf, *uf, *bf, *wo, *uo, *bo, *wg, *ug, *bg;
};

struct LstmCache {
    Tensor x;                          // [T,B,F]
    Tensor i, f, o, g, c, tanh_c, h;   // each [T,B,H]
};

// i,f,o = sigmoid gates, g = tanh candidate, c_t = f*c_{t-1} + i*g,
// h_t = o * tanh(c_t)
inline Tensor lstm_forward(const Tensor& x, const LstmWeights& wt, LstmCache* cache = nullptr) {
    const std::size_t steps = x.dim(0), batch = x.dim(1), feat = x.dim(2);
    const std::size_t hidden = wt.bi->dim(0);
    if (wt.wi->dim(0) != feat) throw ConfigError("lstm: input width mismatch");
    const std::size_t bh = batch * hidden;

    LstmCache local;
    LstmCache& cc = cache ? *cache : local;
    for (Tensor* t : {&cc.i, &cc.f, &cc.o, &cc.g, &cc.c, &cc.tanh_c, &cc.h}) {
        *t = Tensor({steps, batch, hidden});
    }

    std::vector<double> ai(bh), af(bh), ao(bh), ag(bh);
    const double* hprev = nullptr;
    const double* cprev = nullptr;
    for (std::size_t t = 0; t < steps; ++t) {
        const double* xt = &x(t, 0, 0);
        struct GateIn {
            std::vector<double>* a;
            const Tensor *w, *u, *b;
        };
        const GateIn gates[4] = {{&ai, wt.wi, wt.ui, wt.bi},
                                 {&af, wt.wf, wt.uf, wt.bf},
                                 {&ao, wt.wo, wt.uo, wt.bo},
                                 {&ag, wt.wg, wt.ug, wt.bg}};
        for (const auto& gi : gates) {
            std::fill(gi.a->begin(), gi.a->end(), 0.0);
            detail::gemm_acc(xt, gi.w->data.data(), gi.a->data(), batch, feat, hidden);
            if (t > 0)
                detail::gemm_acc(hprev, gi.u->data.data(), gi.a->data(), batch, hidden, hidden);
            detail::add_row_bias(gi.a->data(), gi.b->data.data(), batch, hidden);
        }
        double* it = &cc.i(t, 0, 0);
        double* ft = &cc.f(t, 0, 0);
        double* ot = &cc.o(t, 0, 0);
        double* gt = &cc.g(t, 0, 0);
        double* ct = &cc.c(t, 0, 0);
        double* tct = &cc.tanh_c(t, 0, 0);
        double* ht = &cc.h(t, 0, 0);
        for (std::size_t j = 0; j < bh; ++j) {
            it[j] = detail::sigmoid(ai[j]);
            ft[j] = detail::sigmoid(af[j]);
            ot[j] = detail::sigmoid(ao[j]);
            gt[j] = std::tanh(ag[j]);
            const double cp = t > 0 ? cprev[j] : 0.0;
            ct[j] = ft[j] * cp + it[j] * gt[j];
            tct[j] = std::tanh(ct[j]);
            ht[j] = ot[j] * tct[j];
        }
        hprev = ht;
        cprev = ct;
    }
    Tensor out = cc.h;
    if (cache) cc.x = x;
    return out;
}

inline Tensor lstm_backward(const LstmCache& cache, const LstmWeights& wt, const Tensor& dh_seq,
                            const LstmGrads& g) {
    const std::size_t steps = cache.x.dim(0), batch = cache.x.dim(1), feat = cache.x.dim(2);
    const std::size_t hidden = wt.bi->dim(0);
    const std::size_t bh = batch * hidden;

    Tensor dx({steps, batch, feat});
    std::vector<double> dh_next(bh, 0.0), dc_next(bh, 0.0);
    std::vector<double> dai(bh), daf(bh), dao(bh), dag(bh);
    for (std::size_t t = steps; t-- > 0;) {
        const double* it = &cache.i(t, 0, 0);
        const double* ft = &cache.f(t, 0, 0);
        const double* ot = &cache.o(t, 0, 0);
        const double* gt = &cache.g(t, 0, 0);
        const double* tct = &cache.tanh_c(t, 0, 0);
        const double* cprev = t > 0 ? &cache.c(t - 1, 0, 0) : nullptr;
        const double* dht_in = &dh_seq(t, 0, 0);
        for (std::size_t j = 0; j < bh; ++j) {
            const double dh = dht_in[j] + dh_next[j];
            const double dc = dh * ot[j] * (1.0 - tct[j] * tct[j]) + dc_next[j];
            const double cp = cprev ? cprev[j] : 0.0;
            dao[j] = dh * tct[j] * ot[j] * (1.0 - ot[j]);
            daf[j] = dc * cp * ft[j] * (1.0 - ft[j]);
            dai[j] = dc * gt[j] * it[j] * (1.0 - it[j]);
            dag[j] = dc * it[j] * (1.0 - gt[j] * gt[j]);
            dc_next[j] = dc * ft[j];
        }
        struct GateOut {
            const std::vector<double>* da;
            const Tensor *w, *u;
            Tensor *dw, *du, *db;
        };
        const GateOut gates[4] = {{&dai, wt.wi, wt.ui, g.wi, g.ui, g.bi},
                                  {&daf, wt.wf, wt.uf, g.wf, g.uf, g.bf},
                                  {&dao, wt.wo, wt.uo, g.wo, g.uo, g.bo},
                                  {&dag, wt.wg, wt.ug, g.wg, g.ug, g.bg}};
        const double* xt = &cache.x(t, 0, 0);
        const double* hprev = t > 0 ? &cache.h(t - 1, 0, 0) : nullptr;
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        for (const auto& go : gates) {
            detail::gemm_a_bt_acc(go.da->data(), go.w->data.data(), &dx(t, 0, 0), batch, hidden,
                                  feat);
            detail::gemm_at_b_acc(xt, go.da->data(), go.dw->data.data(), batch, feat, hidden);
            detail::col_sum_acc(go.da->data(), go.db->data.data(), batch, hidden);
            if (hprev) {
                detail::gemm_at_b_acc(hprev, go.da->data(), go.du->data.data(), batch, hidden,
                                      hidden);
                detail::gemm_a_bt_acc(go.da->data(), go.u->data.data(), dh_next.data(), batch,
                                      hidden, hidden);
            }
        }
    }
    return dx;
}

struct GruWeights {
    const Tensor *wz, *uz, *bz, *wr, *ur, *br, *wh, *uh, *bh;
};
struct GruGrads {
    Tensor *wz, *uz, *bz, *wr, *ur, *br, *wh, *uh, *bh;
};

struct GruCache {
    Tensor x;                 // [T,B,F]
    Tensor z, r, hbar, rh, h; // each [T,B,H]; rh = r * h_{t-1}
};

// z,r = sigmoid gates, hbar = tanh(x W_h + (r*h_{t-1}) U_h + b_h),
// h_t = z*h_{t-1} + (1-z)*hbar
inline Tensor gru_forward(const Tensor& x, const GruWeights& wt, GruCache* cache = nullptr) {
    const std::size_t steps = x.dim(0), batch = x.dim(1), feat = x.dim(2);
    const std::size_t hidden = wt.bz->dim(0);
    if (wt.wz->dim(0) != feat) throw ConfigError("gru: input width mismatch");
    const std::size_t bh = batch * hidden;

    GruCache local;
    GruCache& cc = cache ? *cache : local;
    for (Tensor* t : {&cc.z, &cc.r, &cc.hbar, &cc.rh, &cc.h}) {
        *t = Tensor({steps, batch, hidden});
    }

    std::vector<double> az(bh), ar(bh), ah(bh);
    const double* hprev = nullptr;
    for (std::size_t t = 0; t < steps; ++t) {
        const double* xt = &x(t, 0, 0);
        std::fill(az.begin(), az.end(), 0.0);
        std::fill(ar.begin(), ar.end(), 0.0);
        std::fill(ah.begin(), ah.end(), 0.0);
        detail::gemm_acc(xt, wt.wz->data.data(), az.data(), batch, feat, hidden);
        detail::gemm_acc(xt, wt.wr->data.data(), ar.data(), batch, feat, hidden);
        detail::gemm_acc(xt, wt.wh->data.data(), ah.data(), batch, feat, hidden);
        if (t > 0) {
            detail::gemm_acc(hprev, wt.uz->data.data(), az.data(), batch, hidden, hidden);
            detail::gemm_acc(hprev, wt.ur->data.data(), ar.data(), batch, hidden, hidden);
        }
        detail::add_row_bias(az.data(), wt.bz->data.data(), batch, hidden);
        detail::add_row_bias(ar.data(), wt.br->data.data(), batch, hidden);

        double* zt = &cc.z(t, 0, 0);
        double* rt = &cc.r(t, 0, 0);
        double* rht = &cc.rh(t, 0, 0);
        for (std::size_t j = 0; j < bh; ++j) {
            zt[j] = detail::sigmoid(az[j]);
            rt[j] = detail::sigmoid(ar[j]);
            rht[j] = rt[j] * (t > 0 ? hprev[j] : 0.0);
        }
        detail::gemm_acc(rht, wt.uh->data.data(), ah.data(), batch, hidden, hidden);
        detail::add_row_bias(ah.data(), wt.bh->data.data(), batch, hidden);

        double* hbt = &cc.hbar(t, 0, 0);
        double* ht = &cc.h(t, 0, 0);
        for (std::size_t j = 0; j < bh; ++j) {
            hbt[j] = std::tanh(ah[j]);
            const double hp = t > 0 ? hprev[j] : 0.0;
            ht[j] = zt[j] * hp + (1.0 - zt[j]) * hbt[j];
        }
        hprev = ht;
    }
    Tensor out = cc.h;
    if (cache) cc.x = x;
    return out;
}

inline Tensor gru_backward(const GruCache& cache, const GruWeights& wt, const Tensor& dh_seq,
                           const GruGrads& g) {
    const std::size_t steps = cache.x.dim(0), batch = cache.x.dim(1), feat = cache.x.dim(2);
    const std::size_t hidden = wt.bz->dim(0);
    const std::size_t bh = batch * hidden;

    Tensor dx({steps, batch, feat});
    std::vector<double> dh_next(bh, 0.0);
    std::vector<double> daz(bh), dar(bh), dah(bh), drh(bh);
    for (std::size_t t = steps; t-- > 0;) {
        const double* zt = &cache.z(t, 0, 0);
        const double* rt = &cache.r(t, 0, 0);
        const double* hbt = &cache.hbar(t, 0, 0);
        const double* hprev = t > 0 ? &cache.h(t - 1, 0, 0) : nullptr;
        const double* dht_in = &dh_seq(t, 0, 0);
        for (std::size_t j = 0; j < bh; ++j) {
            const double dh = dht_in[j] + dh_next[j];
            const double hp = hprev ? hprev[j] : 0.0;
            const double dz = dh * (hp - hbt[j]);
            const double dhb = dh * (1.0 - zt[j]);
            daz[j] = dz * zt[j] * (1.0 - zt[j]);
            dah[j] = dhb * (1.0 - hbt[j] * hbt[j]);
            dh_next[j] = dh * zt[j];  // state path; gate paths added below
        }
        // candidate pre-activation feeds U_h via rh = r*h_prev
        std::fill(drh.begin(), drh.end(), 0.0);
        detail::gemm_a_bt_acc(dah.data(), wt.uh->data.data(), drh.data(), batch, hidden, hidden);
        for (std::size_t j = 0; j < bh; ++j) {
            const double hp = hprev ? hprev[j] : 0.0;
            const double dr = drh[j] * hp;
            dar[j] = dr * rt[j] * (1.0 - rt[j]);
            dh_next[j] += drh[j] * rt[j];
        }

        const double* xt = &cache.x(t, 0, 0);
        const double* rht = &cache.rh(t, 0, 0);
        detail::gemm_a_bt_acc(daz.data(), wt.wz->data.data(), &dx(t, 0, 0), batch, hidden, feat);
        detail::gemm_a_bt_acc(dar.data(), wt.wr->data.data(), &dx(t, 0, 0), batch, hidden, feat);
        detail::gemm_a_bt_acc(dah.data(), wt.wh->data.data(), &dx(t, 0, 0), batch, hidden, feat);
        detail::gemm_at_b_acc(xt, daz.data(), g.wz->data.data(), batch, feat, hidden);
        detail::gemm_at_b_acc(xt, dar.data(), g.wr->data.data(), batch, feat, hidden);
        detail::gemm_at_b_acc(xt, dah.data(), g.wh->data.data(), batch, feat, hidden);
        detail::col_sum_acc(daz.data(), g.bz->data.data(), batch, hidden);
        detail::col_sum_acc(dar.data(), g.br->data.data(), batch, hidden);
        detail::col_sum_acc(dah.data(), g.bh->data.data(), batch, hidden);
        detail::gemm_at_b_acc(rht, dah.data(), g.uh->data.data(), batch, hidden, hidden);
        if (hprev) {
            detail::gemm_at_b_acc(hprev, daz.data(), g.uz->data.data(), batch, hidden, hidden);
            detail::gemm_at_b_acc(hprev, dar.data(), g.ur->data.data(), batch, hidden, hidden);
            std::vector<double> tmp(bh, 0.0);
            detail::gemm_a_bt_acc(daz.data(), wt.uz->data.data(), tmp.data(), batch, hidden,
                                  hidden);
            detail::gemm_a_bt_acc(dar.data(), wt.ur->data.data(), tmp.data(), batch, hidden,
                                  hidden);
            for (std::size_t j = 0; j < bh; ++j) dh_next[j] += tmp[j];
        } else {
            std::fill(dh_next.begin(), dh_next.end(), 0.0);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// layout helpers
// ---------------------------------------------------------------------------

// [B,T,F] -> [T,B,F]
inline Tensor to_time_major(const Tensor& x) {
    const std::size_t batch = x.dim(0), steps = x.dim(1), feat = x.dim(2);
    Tensor y({steps, batch, feat});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            const double* src = &x(b, t, 0);
            double* dst = &y(t, b, 0);
            for (std::size_t f = 0; f < feat; ++f) dst[f] = src[f];
        }
    }
    return y;
}

// [B,T,F] -> [B, T*F]
inline Tensor flatten2(const Tensor& x) {
    Tensor y = x;
    y.shape = {x.dim(0), x.dim(1) * x.dim(2)};
    return y;
}

}  // namespace fedicu
