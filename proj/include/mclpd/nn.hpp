#pragma once
// Small dense-layer toolkit: 1D convolution (im2col + GEMM), batch norm,
// linear layers, ReLU and global average pooling, each with an analytic
// backward pass. Double precision throughout so finite-difference checks
// resolve at 1e-4 relative error.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mclpd/tensor.hpp"

namespace mclpd {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc);

// Cap worker threads for BLAS and parallel_for (also honored by the
// MCLPD_THREADS env variable).
void set_num_threads(int n);
int num_threads();

// Static range split over worker threads; fn(begin, end) ranges are disjoint,
// so results are deterministic regardless of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

inline std::size_t conv_out_len(std::size_t in_len, std::size_t kernel, std::size_t stride) {
    if (in_len < kernel) throw std::invalid_argument("conv: input shorter than kernel");
    return (in_len - kernel) / stride + 1;
}

// ---- conv1d ---------------------------------------------------------------
// x [B, Cin, Lin], w [Cout, Cin, K], b [Cout] -> y [B, Cout, Lout]; valid
// padding, configurable stride.
Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride);
// Accumulates dw/db; writes dx when non-null.
void conv1d_backward(const Tensor& dy, const Tensor& x, const Tensor& w, std::size_t stride,
                     Tensor* dx, Tensor& dw, Tensor& db);

// ---- batch norm over [B, C, L] --------------------------------------------
struct BatchNormCache {
    Tensor xhat;
    std::vector<double> invstd;
    bool train = false;
};

// Train mode normalizes with batch statistics (population variance) and, when
// update_running is set, folds them into running stats with the given
// momentum. Eval mode normalizes with running stats.
Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, bool train,
                         bool update_running, double momentum, double eps,
                         BatchNormCache* cache);
// Train-mode backward only.
void batchnorm_backward(const Tensor& dy, const BatchNormCache& cache, const Tensor& gamma,
                        Tensor* dx, Tensor& dgamma, Tensor& dbeta);

// ---- relu / pooling --------------------------------------------------------
void relu_inplace(Tensor& x);
// dy masked by (y > 0), in place.
void relu_backward_inplace(Tensor& dy, const Tensor& y);

// [B, C, L] -> [B, C] mean over L.
Mat gap_forward(const Tensor& x);
Tensor gap_backward(const Mat& dh, std::size_t len);

// ---- linear ----------------------------------------------------------------
// x [B, in], w [out, in], b [out] -> y [B, out].
Mat linear_forward(const Mat& x, const Tensor& w, const Tensor& b);
void linear_backward(const Mat& dy, const Mat& x, const Tensor& w, Mat* dx, Tensor& dw,
                     Tensor& db);

}  // namespace mclpd
