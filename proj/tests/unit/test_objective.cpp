#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mclpd/objective.hpp"

using namespace mclpd;

namespace {

// Independent brute-force NT-Xent: explicit cosine similarities, no shared
// code with the implementation.
double brute_force_pair(const std::vector<std::vector<double>>& vi,
                        const std::vector<std::vector<double>>& vj, double tau,
                        std::size_t k) {
    auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        return dot / (std::sqrt(na) * std::sqrt(nb));
    };
    double denom = 0.0;
    for (std::size_t l = 0; l < vj.size(); ++l) denom += std::exp(cosine(vi[k], vj[l]) / tau);
    return -std::log(std::exp(cosine(vi[k], vj[k]) / tau) / denom);
}

double brute_force_total(const std::vector<std::vector<std::vector<double>>>& views,
                         double tau) {
    const std::size_t m = views.size(), n = views[0].size();
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            for (std::size_t k = 0; k < n; ++k)
                total += brute_force_pair(views[i], views[j], tau, k) +
                         brute_force_pair(views[j], views[i], tau, k);
    return total * 2.0 / (static_cast<double>(m) * static_cast<double>(m - 1)) /
           static_cast<double>(n);
}

ViewSet to_viewset(const std::vector<std::vector<std::vector<double>>>& views, double tau) {
    ViewSet vs;
    vs.tau = tau;
    for (const auto& v : views) {
        Mat m(v.size(), v[0].size());
        for (std::size_t r = 0; r < v.size(); ++r)
            for (std::size_t c = 0; c < v[0].size(); ++c) m.at(r, c) = v[r][c];
        vs.projections.push_back(m);
    }
    return vs;
}

std::vector<std::vector<std::vector<double>>> random_views(std::size_t m, std::size_t n,
                                                           std::size_t p, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<std::vector<std::vector<double>>> out(
        m, std::vector<std::vector<double>>(n, std::vector<double>(p)));
    for (auto& view : out)
        for (auto& row : view)
            for (auto& v : row) v = g(rng) + 0.1;  // keep norms away from zero
    return out;
}

}  // namespace

TEST_CASE("ntxent_pair: degenerate single sample gives zero loss") {
    auto views = random_views(2, 1, 3, 1);
    auto losses = ntxent_pair(to_viewset(views, 0.1), 0, 1);
    REQUIRE(losses.size() == 1);
    CHECK(std::abs(losses[0]) < 1e-12);
}

TEST_CASE("ntxent_pair: hand value for identical orthogonal views") {
    std::vector<std::vector<std::vector<double>>> views = {
        {{1.0, 0.0}, {0.0, 1.0}},
        {{1.0, 0.0}, {0.0, 1.0}},
    };
    auto losses = ntxent_pair(to_viewset(views, 0.1), 0, 1);
    const double expect = std::log(1.0 + std::exp(-10.0));
    CHECK(losses[0] == doctest::Approx(expect).epsilon(1e-9));
    CHECK(losses[1] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("ntxent matches the brute-force oracle on random instances") {
    for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
        const std::size_t m = 2 + seed % 2, n = 2 + seed % 7, p = 1 + seed % 4;
        auto views = random_views(m, n, p, seed);
        ViewSet vs = to_viewset(views, 0.25);
        auto losses = ntxent_pair(vs, 0, 1);
        for (std::size_t k = 0; k < n; ++k)
            CHECK(losses[k] ==
                  doctest::Approx(brute_force_pair(views[0], views[1], 0.25, k)).epsilon(1e-6));
        CHECK(contrastive_loss(vs) ==
              doctest::Approx(brute_force_total(views, 0.25)).epsilon(1e-6));
    }
}

TEST_CASE("contrastive_loss: closed form for identical views with orthogonal rows") {
    for (std::size_t n : {2u, 4u, 8u}) {
        std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) rows[i][i] = 1.0;
        std::vector<std::vector<std::vector<double>>> views = {rows, rows};
        const double loss = contrastive_loss(to_viewset(views, 0.1));
        const double expect =
            2.0 * std::log(1.0 + static_cast<double>(n - 1) * std::exp(-10.0));
        CHECK(loss == doctest::Approx(expect).epsilon(1e-9));
        CHECK(loss >= 0.0);
    }
}

TEST_CASE("contrastive_loss: M=2 coefficient is one") {
    auto views = random_views(2, 5, 3, 9);
    ViewSet vs = to_viewset(views, 0.2);
    auto l12 = ntxent_pair(vs, 0, 1);
    auto l21 = ntxent_pair(vs, 1, 0);
    double manual = 0.0;
    for (std::size_t k = 0; k < l12.size(); ++k) manual += l12[k] + l21[k];
    manual /= static_cast<double>(l12.size());
    CHECK(contrastive_loss(vs) == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("contrastive_loss is non-negative and rejects bad input") {
    for (unsigned seed : {11u, 12u, 13u}) {
        auto views = random_views(3, 6, 4, seed);
        CHECK(contrastive_loss(to_viewset(views, 0.5)) >= 0.0);
    }
    auto views = random_views(1, 4, 3, 14);
    CHECK_THROWS_AS(contrastive_loss(to_viewset(views, 0.1)), std::invalid_argument);
    auto zero = random_views(2, 2, 2, 15);
    zero[0][1] = {0.0, 0.0};
    CHECK_THROWS_AS(contrastive_loss(to_viewset(zero, 0.1)), std::invalid_argument);
    auto ok = random_views(2, 2, 2, 16);
    ViewSet vs = to_viewset(ok, 0.0);
    CHECK_THROWS_AS(contrastive_loss(vs), std::invalid_argument);
}

TEST_CASE("contrastive_loss is invariant under a common rotation") {
    auto views = random_views(2, 4, 3, 21);
    const double base = contrastive_loss(to_viewset(views, 0.15));
    // rotate in the (0,1) plane then the (1,2) plane
    const double a = 0.73, b = -1.1;
    auto rotate = [&](std::vector<double>& v) {
        double x = v[0] * std::cos(a) - v[1] * std::sin(a);
        double y = v[0] * std::sin(a) + v[1] * std::cos(a);
        v[0] = x;
        v[1] = y;
        double u = v[1] * std::cos(b) - v[2] * std::sin(b);
        double w = v[1] * std::sin(b) + v[2] * std::cos(b);
        v[1] = u;
        v[2] = w;
    };
    for (auto& view : views)
        for (auto& row : view) rotate(row);
    CHECK(contrastive_loss(to_viewset(views, 0.15)) == doctest::Approx(base).epsilon(1e-6));
}

TEST_CASE("contrastive_loss decreases as the positive pair aligns") {
    // fixed negatives, positive similarity swept upward
    std::vector<double> losses;
    for (double align : {0.0, 0.5, 0.9, 0.99}) {
        std::vector<std::vector<std::vector<double>>> views = {
            {{1.0, 0.0}, {0.0, 1.0}},
            {{align, std::sqrt(1.0 - align * align)}, {0.0, 1.0}},
        };
        losses.push_back(contrastive_loss(to_viewset(views, 0.3)));
    }
    for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
}

TEST_CASE("contrastive_loss gradient matches central differences") {
    for (unsigned seed : {31u, 32u, 33u}) {
        auto views = random_views(2, 4, 4, seed);
        ViewSet vs = to_viewset(views, 0.2);
        std::vector<Mat> grads;
        contrastive_loss(vs, &grads);
        const double h = 1e-6;
        for (std::size_t v = 0; v < vs.projections.size(); ++v) {
            for (std::size_t i = 0; i < vs.projections[v].v.size(); ++i) {
                ViewSet p = vs, m = vs;
                p.projections[v].v[i] += h;
                m.projections[v].v[i] -= h;
                const double num = (contrastive_loss(p) - contrastive_loss(m)) / (2.0 * h);
                const double ana = grads[v].v[i];
                CHECK(std::abs(num - ana) <= 1e-4 * std::max({std::abs(num), std::abs(ana), 1e-3}));
            }
        }
    }
}

TEST_CASE("smoothed_ce: eps 0 equals one-hot cross entropy") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> g;
    Mat logits(3, 4);
    for (auto& v : logits.v) v = g(rng);
    std::vector<int> y = {2, 0, 3};
    const double loss = smoothed_ce(logits, y, 0.0);
    double manual = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
        double mx = logits.at(s, 0);
        for (std::size_t c = 1; c < 4; ++c) mx = std::max(mx, logits.at(s, c));
        double lse = 0.0;
        for (std::size_t c = 0; c < 4; ++c) lse += std::exp(logits.at(s, c) - mx);
        manual -= logits.at(s, static_cast<std::size_t>(y[s])) - (mx + std::log(lse));
    }
    CHECK(loss == doctest::Approx(manual / 3.0).epsilon(1e-9));
}

TEST_CASE("smoothed_ce: smoothed target distribution") {
    // eps=0.1, K=2, true=1 -> target [0.1, 0.9]
    Mat logits(1, 2);
    logits.v = {0.3, -0.7};
    const double loss = smoothed_ce(logits, {1}, 0.1);
    const double mx = 0.3;
    const double lse = std::exp(0.3 - mx) + std::exp(-0.7 - mx);
    const double ls0 = 0.3 - mx - std::log(lse), ls1 = -0.7 - mx - std::log(lse);
    CHECK(loss == doctest::Approx(-(0.1 * ls0 + 0.9 * ls1)).epsilon(1e-9));
}

TEST_CASE("smoothed_ce: uniform logits give log K for any eps") {
    for (std::size_t k : {2u, 5u}) {
        Mat logits(2, k);
        logits.fill(0.37);
        for (double eps : {0.0, 0.1, 0.5}) {
            CHECK(smoothed_ce(logits, {0, static_cast<int>(k - 1)}, eps) ==
                  doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-9));
        }
    }
}

TEST_CASE("smoothed_ce gradient is softmax minus target") {
    Mat logits(2, 3);
    logits.v = {0.5, -0.2, 1.1, 0.0, 0.3, -0.9};
    std::vector<int> y = {1, 2};
    const double eps = 0.1;
    Mat dlogits;
    smoothed_ce(logits, y, eps, &dlogits);
    for (std::size_t s = 0; s < 2; ++s) {
        double mx = logits.at(s, 0);
        for (std::size_t c = 1; c < 3; ++c) mx = std::max(mx, logits.at(s, c));
        double lse = 0.0;
        for (std::size_t c = 0; c < 3; ++c) lse += std::exp(logits.at(s, c) - mx);
        for (std::size_t c = 0; c < 3; ++c) {
            const double softm = std::exp(logits.at(s, c) - mx) / lse;
            const double target = static_cast<int>(c) == y[s] ? 1.0 - eps : eps / 2.0;
            CHECK(dlogits.at(s, c) == doctest::Approx((softm - target) / 2.0).epsilon(1e-9));
        }
    }

    // central differences
    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
        Mat p = logits, m = logits;
        p.v[i] += h;
        m.v[i] -= h;
        const double num = (smoothed_ce(p, y, eps) - smoothed_ce(m, y, eps)) / (2.0 * h);
        CHECK(std::abs(num - dlogits.v[i]) <= 1e-4 * std::max({std::abs(num), 1e-3}));
    }
}

TEST_CASE("smoothed_ce input validation") {
    Mat logits(1, 2);
    CHECK_THROWS_AS(smoothed_ce(logits, {0}, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(smoothed_ce(logits, {0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(smoothed_ce(logits, {0, 1}, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(smoothed_ce(logits, {5}, 0.1), std::invalid_argument);
    Mat one_class(1, 1);
    CHECK_THROWS_AS(smoothed_ce(one_class, {0}, 0.1), std::invalid_argument);
}
