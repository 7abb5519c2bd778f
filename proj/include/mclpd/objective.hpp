#pragma once
// Multi-view NT-Xent contrastive loss and label-smoothed cross entropy,
// both with analytic gradients w.r.t. their raw (unnormalized) inputs.

#include <vector>

#include "mclpd/tensor.hpp"

namespace mclpd {

// M views of N samples projected to dimension P. Projections are raw; the
// loss normalizes rows to unit norm internally (zero-norm rows are rejected).
struct ViewSet {
    std::vector<Mat> projections;  // M matrices [N x P]
    double tau = 0.1;

    std::size_t n_views() const { return projections.size(); }
    std::size_t n_samples() const { return projections.empty() ? 0 : projections[0].rows; }
};

// Per-sample losses l_k^{(i,j)}: positives are the same sample index in view j,
// the denominator runs over all N samples of view j (positive included).
std::vector<double> ntxent_pair(const ViewSet& views, std::size_t i, std::size_t j);

// 2/(M(M-1)) * sum_{i<j} mean_k( l_k^{(i,j)} + l_k^{(j,i)} ). When grads is
// non-null it receives dL/d(projection) for every view, same shapes.
double contrastive_loss(const ViewSet& views, std::vector<Mat>* grads = nullptr);

// Label-smoothed cross entropy: target mass 1-eps on the true class and
// eps/(K-1) on each other class; mean over the batch. dlogits optional.
double smoothed_ce(const Mat& logits, const std::vector<int>& targets, double eps,
                   Mat* dlogits = nullptr);

}  // namespace mclpd
