#include "mclpd/nn.hpp"

#include <cblas.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

extern "C" void openblas_set_num_threads(int);

namespace mclpd {

namespace {
std::atomic<int> g_threads{0};

int env_thread_cap() {
    if (const char* s = std::getenv("MCLPD_THREADS")) {
        const int n = std::atoi(s);
        if (n > 0) return n;
    }
    return 0;
}

void apply_thread_cap() {
    static std::atomic<bool> done{false};
    if (done.exchange(true)) return;
    const int cap = env_thread_cap();
    if (cap > 0) {
        g_threads = cap;
        openblas_set_num_threads(cap);
    }
}

int worker_count() {
    apply_thread_cap();
    const int cap = g_threads.load();
    if (cap > 0) return cap;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 8u));
}
}  // namespace

void set_num_threads(int n) {
    if (n > 0) {
        g_threads = n;
        openblas_set_num_threads(n);
    }
}

int num_threads() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t step = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t lo = w * step;
        if (lo >= n) break;
        pool.emplace_back(fn, lo, std::min(n, lo + step));
    }
    fn(0, std::min(n, step));
    for (auto& t : pool) t.join();
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc) {
    apply_thread_cap();
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
                beta, c, static_cast<int>(ldc));
}

// ---- conv1d -----------------------------------------------------------------

namespace {

// Batch samples are grouped into one wide GEMM per chunk; the chunk size caps
// the im2col workspace at roughly 48 MB.
std::size_t conv_chunk(std::size_t batch, std::size_t ck, std::size_t lout) {
    const std::size_t per_sample = ck * lout * sizeof(double);
    const std::size_t budget = 48ull << 20;
    std::size_t chunk = per_sample > 0 ? std::max<std::size_t>(1, budget / per_sample) : batch;
    return std::min(chunk, batch);
}

}  // namespace

Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride) {
    if (x.rank() != 3 || w.rank() != 3) throw std::invalid_argument("conv1d: bad ranks");
    const std::size_t batch = x.dim(0), cin = x.dim(1), lin = x.dim(2);
    const std::size_t cout = w.dim(0), kernel = w.dim(2);
    if (w.dim(1) != cin) throw std::invalid_argument("conv1d: channel mismatch");
    const std::size_t lout = conv_out_len(lin, kernel, stride);
    const std::size_t ck = cin * kernel;
    const std::size_t chunk = conv_chunk(batch, ck, lout);
    Tensor y({batch, cout, lout});
    std::vector<double> col(ck * chunk * lout);
    std::vector<double> out(cout * chunk * lout);
    for (std::size_t start = 0; start < batch; start += chunk) {
        const std::size_t n = std::min(chunk, batch - start);
        const std::size_t wide = n * lout;
        parallel_for(n, [&](std::size_t s0, std::size_t s1) {
            for (std::size_t s = s0; s < s1; ++s)
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    const double* xc = &x.v[((start + s) * cin + ci) * lin];
                    for (std::size_t k = 0; k < kernel; ++k) {
                        double* dst = col.data() + (ci * kernel + k) * wide + s * lout;
                        for (std::size_t p = 0; p < lout; ++p) dst[p] = xc[p * stride + k];
                    }
                }
        });
        gemm(false, false, cout, wide, ck, 1.0, w.data(), ck, col.data(), wide, 0.0, out.data(),
             wide);
        parallel_for(n, [&](std::size_t s0, std::size_t s1) {
            for (std::size_t s = s0; s < s1; ++s)
                for (std::size_t co = 0; co < cout; ++co) {
                    const double* src = out.data() + co * wide + s * lout;
                    const double bias = b.v[co];
                    double* dst = &y.v[((start + s) * cout + co) * lout];
                    for (std::size_t p = 0; p < lout; ++p) dst[p] = src[p] + bias;
                }
        });
    }
    return y;
}

void conv1d_backward(const Tensor& dy, const Tensor& x, const Tensor& w, std::size_t stride,
                     Tensor* dx, Tensor& dw, Tensor& db) {
    const std::size_t batch = x.dim(0), cin = x.dim(1), lin = x.dim(2);
    const std::size_t cout = w.dim(0), kernel = w.dim(2);
    const std::size_t lout = dy.dim(2);
    const std::size_t ck = cin * kernel;
    const std::size_t chunk = conv_chunk(batch, ck, lout);
    std::vector<double> col(ck * chunk * lout);
    std::vector<double> dy_wide(cout * chunk * lout);
    std::vector<double> dcol(dx ? ck * chunk * lout : 0);
    for (std::size_t start = 0; start < batch; start += chunk) {
        const std::size_t n = std::min(chunk, batch - start);
        const std::size_t wide = n * lout;
        parallel_for(n, [&](std::size_t s0, std::size_t s1) {
            for (std::size_t s = s0; s < s1; ++s)
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    const double* xc = &x.v[((start + s) * cin + ci) * lin];
                    for (std::size_t k = 0; k < kernel; ++k) {
                        double* dst = col.data() + (ci * kernel + k) * wide + s * lout;
                        for (std::size_t p = 0; p < lout; ++p) dst[p] = xc[p * stride + k];
                    }
                }
        });
        parallel_for(cout, [&](std::size_t c0, std::size_t c1) {
            for (std::size_t co = c0; co < c1; ++co) {
                double acc = 0.0;
                for (std::size_t s = 0; s < n; ++s) {
                    const double* src = &dy.v[((start + s) * cout + co) * lout];
                    double* dst = dy_wide.data() + co * wide + s * lout;
                    std::copy(src, src + lout, dst);
                    for (std::size_t p = 0; p < lout; ++p) acc += src[p];
                }
                db.v[co] += acc;
            }
        });
        // dW += dY * col^T
        gemm(false, true, cout, ck, wide, 1.0, dy_wide.data(), wide, col.data(), wide, 1.0,
             dw.data(), ck);
        if (dx) {
            // dcol = W^T * dY, then scatter back per sample
            gemm(true, false, ck, wide, cout, 1.0, w.data(), ck, dy_wide.data(), wide, 0.0,
                 dcol.data(), wide);
            parallel_for(n, [&](std::size_t s0, std::size_t s1) {
                for (std::size_t s = s0; s < s1; ++s)
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        double* xc = &dx->v[((start + s) * cin + ci) * lin];
                        for (std::size_t k = 0; k < kernel; ++k) {
                            const double* src =
                                dcol.data() + (ci * kernel + k) * wide + s * lout;
                            for (std::size_t p = 0; p < lout; ++p) xc[p * stride + k] += src[p];
                        }
                    }
            });
        }
    }
}

// ---- batch norm --------------------------------------------------------------

Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, bool train,
                         bool update_running, double momentum, double eps,
                         BatchNormCache* cache) {
    const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
    Tensor y({batch, ch, len});
    if (cache) {
        cache->train = train;
        cache->invstd.assign(ch, 0.0);
        cache->xhat = Tensor({batch, ch, len});
    }
    const double n = static_cast<double>(batch * len);
    parallel_for(ch, [&](std::size_t c_lo, std::size_t c_hi) {
    for (std::size_t c = c_lo; c < c_hi; ++c) {
        double mean, var;
        if (train) {
            double sum = 0.0;
            for (std::size_t s = 0; s < batch; ++s) {
                const double* xc = &x.v[(s * ch + c) * len];
                for (std::size_t p = 0; p < len; ++p) sum += xc[p];
            }
            mean = sum / n;
            double acc = 0.0;
            for (std::size_t s = 0; s < batch; ++s) {
                const double* xc = &x.v[(s * ch + c) * len];
                for (std::size_t p = 0; p < len; ++p) {
                    const double d = xc[p] - mean;
                    acc += d * d;
                }
            }
            var = acc / n;
            if (update_running) {
                running_mean.v[c] = (1.0 - momentum) * running_mean.v[c] + momentum * mean;
                running_var.v[c] = (1.0 - momentum) * running_var.v[c] + momentum * var;
            }
        } else {
            mean = running_mean.v[c];
            var = running_var.v[c];
        }
        const double invstd = 1.0 / std::sqrt(var + eps);
        const double g = gamma.v[c], bshift = beta.v[c];
        for (std::size_t s = 0; s < batch; ++s) {
            const double* xc = &x.v[(s * ch + c) * len];
            double* yc = &y.v[(s * ch + c) * len];
            double* hc = cache ? &cache->xhat.v[(s * ch + c) * len] : nullptr;
            for (std::size_t p = 0; p < len; ++p) {
                const double xh = (xc[p] - mean) * invstd;
                if (hc) hc[p] = xh;
                yc[p] = g * xh + bshift;
            }
        }
        if (cache) cache->invstd[c] = invstd;
    }
    });
    return y;
}

void batchnorm_backward(const Tensor& dy, const BatchNormCache& cache, const Tensor& gamma,
                        Tensor* dx, Tensor& dgamma, Tensor& dbeta) {
    const std::size_t batch = dy.dim(0), ch = dy.dim(1), len = dy.dim(2);
    const double n = static_cast<double>(batch * len);
    parallel_for(ch, [&](std::size_t c_lo, std::size_t c_hi) {
    for (std::size_t c = c_lo; c < c_hi; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t s = 0; s < batch; ++s) {
            const double* dyc = &dy.v[(s * ch + c) * len];
            const double* hc = &cache.xhat.v[(s * ch + c) * len];
            for (std::size_t p = 0; p < len; ++p) {
                sum_dy += dyc[p];
                sum_dy_xhat += dyc[p] * hc[p];
            }
        }
        dgamma.v[c] += sum_dy_xhat;
        dbeta.v[c] += sum_dy;
        if (dx) {
            const double g = gamma.v[c];
            const double invstd = cache.invstd[c];
            for (std::size_t s = 0; s < batch; ++s) {
                const double* dyc = &dy.v[(s * ch + c) * len];
                const double* hc = &cache.xhat.v[(s * ch + c) * len];
                double* dxc = &dx->v[(s * ch + c) * len];
                for (std::size_t p = 0; p < len; ++p) {
                    // eval mode normalizes with fixed running stats, so the
                    // batch-statistic terms vanish
                    dxc[p] = cache.train
                                 ? g * invstd / n *
                                       (n * dyc[p] - sum_dy - hc[p] * sum_dy_xhat)
                                 : g * invstd * dyc[p];
                }
            }
        }
    }
    });
}

// ---- relu / pooling -----------------------------------------------------------

void relu_inplace(Tensor& x) {
    for (auto& v : x.v) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(Tensor& dy, const Tensor& y) {
    for (std::size_t i = 0; i < dy.size(); ++i)
        if (y.v[i] <= 0.0) dy.v[i] = 0.0;
}

Mat gap_forward(const Tensor& x) {
    const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
    Mat h(batch, ch);
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t s = 0; s < batch; ++s)
        for (std::size_t c = 0; c < ch; ++c) {
            const double* xc = &x.v[(s * ch + c) * len];
            double acc = 0.0;
            for (std::size_t p = 0; p < len; ++p) acc += xc[p];
            h.at(s, c) = acc * inv;
        }
    return h;
}

Tensor gap_backward(const Mat& dh, std::size_t len) {
    Tensor dy({dh.rows, dh.cols, len});
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t s = 0; s < dh.rows; ++s)
        for (std::size_t c = 0; c < dh.cols; ++c) {
            const double g = dh.at(s, c) * inv;
            double* row = &dy.v[(s * dh.cols + c) * len];
            std::fill(row, row + len, g);
        }
    return dy;
}

// ---- linear ---------------------------------------------------------------------

Mat linear_forward(const Mat& x, const Tensor& w, const Tensor& b) {
    const std::size_t out = w.dim(0), in = w.dim(1);
    if (x.cols != in) throw std::invalid_argument("linear: dim mismatch");
    Mat y(x.rows, out);
    gemm(false, true, x.rows, out, in, 1.0, x.v.data(), in, w.data(), in, 0.0, y.v.data(), out);
    for (std::size_t s = 0; s < x.rows; ++s)
        for (std::size_t o = 0; o < out; ++o) y.at(s, o) += b.v[o];
    return y;
}

void linear_backward(const Mat& dy, const Mat& x, const Tensor& w, Mat* dx, Tensor& dw,
                     Tensor& db) {
    const std::size_t out = w.dim(0), in = w.dim(1);
    // dW += dY^T * X
    gemm(true, false, out, in, x.rows, 1.0, dy.v.data(), out, x.v.data(), in, 1.0, dw.data(),
         in);
    for (std::size_t s = 0; s < dy.rows; ++s)
        for (std::size_t o = 0; o < out; ++o) db.v[o] += dy.at(s, o);
    if (dx) {
        *dx = Mat(x.rows, in);
        gemm(false, false, x.rows, in, out, 1.0, dy.v.data(), out, w.data(), in, 0.0,
             dx->v.data(), in);
    }
}

}  // namespace mclpd
