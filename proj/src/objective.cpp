#include "mclpd/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mclpd {

namespace {

// Rows scaled to unit norm; zero-norm rows are invalid input.
Mat normalize_rows(const Mat& z, std::vector<double>* norms) {
    Mat out = z;
    if (norms) norms->assign(z.rows, 0.0);
    for (std::size_t r = 0; r < z.rows; ++r) {
        double n2 = 0.0;
        for (std::size_t c = 0; c < z.cols; ++c) n2 += z.at(r, c) * z.at(r, c);
        const double n = std::sqrt(n2);
        if (n <= 0.0) throw std::invalid_argument("ntxent: zero-norm projection");
        if (norms) (*norms)[r] = n;
        for (std::size_t c = 0; c < z.cols; ++c) out.at(r, c) /= n;
    }
    return out;
}

void check_views(const ViewSet& views) {
    if (views.n_views() < 2) throw std::invalid_argument("ntxent: need at least 2 views");
    if (views.tau <= 0.0) throw std::invalid_argument("ntxent: tau must be positive");
    const std::size_t n = views.projections[0].rows, p = views.projections[0].cols;
    if (n < 1) throw std::invalid_argument("ntxent: empty batch");
    for (const auto& m : views.projections)
        if (m.rows != n || m.cols != p) throw std::invalid_argument("ntxent: ragged views");
}

// Accumulates dL/d(normalized rows) for one ordered pair (a -> anchor view,
// b -> denominator view) with outer weight w; returns sum_k l_k.
double pair_losses(const Mat& za, const Mat& zb, double tau, std::vector<double>* per_sample,
                   double w, Mat* dza, Mat* dzb) {
    const std::size_t n = za.rows, p = za.cols;
    Mat sim(n, n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
            double dot = 0.0;
            for (std::size_t c = 0; c < p; ++c) dot += za.at(k, c) * zb.at(l, c);
            sim.at(k, l) = dot / tau;
        }
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double mx = sim.at(k, 0);
        for (std::size_t l = 1; l < n; ++l) mx = std::max(mx, sim.at(k, l));
        double lse = 0.0;
        for (std::size_t l = 0; l < n; ++l) lse += std::exp(sim.at(k, l) - mx);
        const double log_denom = mx + std::log(lse);
        const double loss_k = log_denom - sim.at(k, k);
        total += loss_k;
        if (per_sample) (*per_sample)[k] = loss_k;
        if (dza && dzb) {
            for (std::size_t l = 0; l < n; ++l) {
                const double p_kl = std::exp(sim.at(k, l) - log_denom);
                const double coeff = w * (p_kl - (l == k ? 1.0 : 0.0)) / tau;
                for (std::size_t c = 0; c < p; ++c) {
                    dza->at(k, c) += coeff * zb.at(l, c);
                    dzb->at(l, c) += coeff * za.at(k, c);
                }
            }
        }
    }
    return total;
}

}  // namespace

std::vector<double> ntxent_pair(const ViewSet& views, std::size_t i, std::size_t j) {
    check_views(views);
    if (i == j || i >= views.n_views() || j >= views.n_views())
        throw std::invalid_argument("ntxent_pair: bad view indices");
    const Mat za = normalize_rows(views.projections[i], nullptr);
    const Mat zb = normalize_rows(views.projections[j], nullptr);
    std::vector<double> losses(za.rows, 0.0);
    pair_losses(za, zb, views.tau, &losses, 0.0, nullptr, nullptr);
    return losses;
}

double contrastive_loss(const ViewSet& views, std::vector<Mat>* grads) {
    check_views(views);
    const std::size_t m = views.n_views();
    const std::size_t n = views.n_samples();
    const double coef = 2.0 / (static_cast<double>(m) * static_cast<double>(m - 1));
    const double w = coef / static_cast<double>(n);

    std::vector<std::vector<double>> norms(m);
    std::vector<Mat> zhat(m);
    for (std::size_t v = 0; v < m; ++v)
        zhat[v] = normalize_rows(views.projections[v], &norms[v]);

    std::vector<Mat> dzhat;
    if (grads) dzhat.assign(m, Mat(n, views.projections[0].cols));

    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            total += pair_losses(zhat[i], zhat[j], views.tau, nullptr, w,
                                 grads ? &dzhat[i] : nullptr, grads ? &dzhat[j] : nullptr);
            total += pair_losses(zhat[j], zhat[i], views.tau, nullptr, w,
                                 grads ? &dzhat[j] : nullptr, grads ? &dzhat[i] : nullptr);
        }
    }
    if (grads) {
        grads->assign(m, Mat(n, views.projections[0].cols));
        for (std::size_t v = 0; v < m; ++v) {
            for (std::size_t r = 0; r < n; ++r) {
                // through row normalization: dz = (dzh - zh * (zh . dzh)) / ||z||
                double dot = 0.0;
                for (std::size_t c = 0; c < zhat[v].cols; ++c)
                    dot += zhat[v].at(r, c) * dzhat[v].at(r, c);
                for (std::size_t c = 0; c < zhat[v].cols; ++c)
                    (*grads)[v].at(r, c) =
                        (dzhat[v].at(r, c) - zhat[v].at(r, c) * dot) / norms[v][r];
            }
        }
    }
    return total * w;
}

double smoothed_ce(const Mat& logits, const std::vector<int>& targets, double eps,
                   Mat* dlogits) {
    if (eps < 0.0 || eps >= 1.0) throw std::invalid_argument("smoothed_ce: eps must be in [0,1)");
    const std::size_t b = logits.rows, k = logits.cols;
    if (k < 2) throw std::invalid_argument("smoothed_ce: need at least 2 classes");
    if (targets.size() != b) throw std::invalid_argument("smoothed_ce: batch size mismatch");
    if (dlogits) *dlogits = Mat(b, k);
    const double off = eps / static_cast<double>(k - 1);
    double total = 0.0;
    for (std::size_t s = 0; s < b; ++s) {
        const int y = targets[s];
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw std::invalid_argument("smoothed_ce: target out of range");
        double mx = logits.at(s, 0);
        for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits.at(s, c));
        double lse = 0.0;
        for (std::size_t c = 0; c < k; ++c) lse += std::exp(logits.at(s, c) - mx);
        const double log_z = mx + std::log(lse);
        for (std::size_t c = 0; c < k; ++c) {
            const double t = (static_cast<int>(c) == y) ? 1.0 - eps : off;
            total -= t * (logits.at(s, c) - log_z);
            if (dlogits) {
                const double softmax = std::exp(logits.at(s, c) - log_z);
                dlogits->at(s, c) = (softmax - t) / static_cast<double>(b);
            }
        }
    }
    return total / static_cast<double>(b);
}

}  // namespace mclpd
