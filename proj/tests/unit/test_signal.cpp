#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "mclpd/signal.hpp"

using namespace mclpd;

namespace {

// Independent O(N^2) DFT oracle.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                               static_cast<double>(t) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

EpochSet make_set(std::size_t n_epochs, std::size_t n_channels, std::size_t n_samples,
                  double fs) {
    EpochSet s;
    s.fs = fs;
    s.data = Tensor({n_epochs, n_channels, n_samples});
    s.subject_ids.assign(n_epochs, 0);
    return s;
}

double rms(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return std::sqrt(acc / static_cast<double>(n));
}

}  // namespace

TEST_CASE("rfft matches the naive DFT") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    for (std::size_t n : {16u, 100u, 250u, 255u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = g(rng);
        auto fast = rfft_complex(x.data(), n);
        auto slow = naive_dft(x);
        for (std::size_t k = 0; k < slow.size(); ++k)
            CHECK(std::abs(fast[k] - slow[k]) < 1e-9 * (1.0 + std::abs(slow[k])));
    }
}

TEST_CASE("rfft round trip and Parseval") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (std::size_t n : {64u, 2500u, 501u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = g(rng);
        auto spec = rfft_complex(x.data(), n);
        auto back = irfft_complex(spec.data(), spec.size(), n);
        double max_err = 0.0;
        for (std::size_t i = 0; i < n; ++i) max_err = std::max(max_err, std::abs(back[i] - x[i]));
        CHECK(max_err < 1e-6);

        // sum_t x^2 == (1/T) sum_f |X_f|^2 over the two-sided spectrum
        double ex = 0.0;
        for (double v : x) ex += v * v;
        double ef = std::norm(spec[0]);
        const bool even = n % 2 == 0;
        for (std::size_t k = 1; k + 1 < spec.size(); ++k) ef += 2.0 * std::norm(spec[k]);
        ef += (even ? 1.0 : 2.0) * std::norm(spec.back());
        ef /= static_cast<double>(n);
        CHECK(std::abs(ex - ef) < 1e-9 * ex);
    }
}

TEST_CASE("pure tone concentrates in one bin") {
    const std::size_t n = 2500;
    const double fs = 500.0;
    Mat x(1, n);
    for (std::size_t t = 0; t < n; ++t)
        x.at(0, t) = std::cos(2.0 * std::numbers::pi * 10.0 * static_cast<double>(t) / fs);
    Spectrum s = rfft(x, fs);
    std::size_t peak = 0;
    for (std::size_t k = 1; k < s.magnitude.cols; ++k)
        if (s.magnitude.at(0, k) > s.magnitude.at(0, peak)) peak = k;
    CHECK(peak == 50);  // 10 Hz at 0.2 Hz resolution
    CHECK(s.bin_hz == doctest::Approx(0.2));
    // everything else is numerically zero
    for (std::size_t k = 0; k < s.magnitude.cols; ++k)
        if (k != peak) CHECK(s.magnitude.at(0, k) < 1e-6 * s.magnitude.at(0, peak));
}

TEST_CASE("zero signal has zero magnitude") {
    Mat x(2, 128);
    Spectrum s = rfft(x, 500.0);
    for (double v : s.magnitude.v) CHECK(v == 0.0);
    Mat back = irfft(s);
    for (double v : back.v) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("Spectrum round trip through magnitude/phase") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Mat x(3, 500);
    for (auto& v : x.v) v = g(rng);
    Spectrum s = rfft(x, 500.0);
    for (double m : s.magnitude.v) CHECK(m >= 0.0);
    Mat back = irfft(s);
    for (std::size_t i = 0; i < x.v.size(); ++i) CHECK(std::abs(back.v[i] - x.v[i]) < 1e-6);
}

TEST_CASE("bandpass preserves passband tone and kills stopband tone") {
    const double fs = 500.0;
    const std::size_t taps = 501;
    auto h = design_bandpass(1.0, 45.0, fs, taps);

    // frequency response of the designed taps, evaluated directly
    auto resp = [&](double f) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t k = 0; k < h.size(); ++k) {
            const double ang = -2.0 * std::numbers::pi * f * static_cast<double>(k) / fs;
            acc += h[k] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        return std::abs(acc);
    };
    CHECK(resp(10.0) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(resp(60.0) < 0.01);

    const std::size_t n = 2500;
    EpochSet tone10 = make_set(1, 1, n, fs);
    EpochSet tone60 = make_set(1, 1, n, fs);
    for (std::size_t t = 0; t < n; ++t) {
        tone10.data.v[t] = std::sin(2.0 * std::numbers::pi * 10.0 * static_cast<double>(t) / fs);
        tone60.data.v[t] = std::sin(2.0 * std::numbers::pi * 60.0 * static_cast<double>(t) / fs);
    }
    EpochSet out10 = bandpass(tone10, 1.0, 45.0, taps);
    EpochSet out60 = bandpass(tone60, 1.0, 45.0, taps);
    // interior samples avoid the zero-padded edges
    const std::size_t d = (taps - 1) / 2;
    const double in_rms = rms(&tone10.data.v[d], n - 2 * d);
    const double out_rms = rms(&out10.data.v[d], n - 2 * d);
    CHECK(out_rms == doctest::Approx(in_rms).epsilon(0.05));
    CHECK(rms(&out60.data.v[0], n) < 0.10 * rms(&tone60.data.v[0], n));
}

TEST_CASE("bandpass zero in, zero out; rejects bad edges") {
    EpochSet z = make_set(2, 3, 600, 500.0);
    EpochSet out = bandpass(z, 1.0, 45.0, 101);
    for (double v : out.data.v) CHECK(v == 0.0);
    CHECK_THROWS_AS(bandpass(z, 45.0, 1.0, 101), std::invalid_argument);
    CHECK_THROWS_AS(bandpass(z, 0.0, 45.0, 101), std::invalid_argument);
    CHECK_THROWS_AS(bandpass(z, 1.0, 250.0, 101), std::invalid_argument);
    CHECK_THROWS_AS(bandpass(z, 1.0, 45.0, 100), std::invalid_argument);
}

TEST_CASE("bandpass is linear") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    const std::size_t n = 400;
    EpochSet x = make_set(1, 2, n, 500.0), y = make_set(1, 2, n, 500.0);
    for (auto& v : x.data.v) v = g(rng);
    for (auto& v : y.data.v) v = g(rng);
    const double a = 1.7, b = -0.3;
    EpochSet combo = x;
    for (std::size_t i = 0; i < combo.data.v.size(); ++i)
        combo.data.v[i] = a * x.data.v[i] + b * y.data.v[i];
    EpochSet fc = bandpass(combo, 1.0, 45.0, 101);
    EpochSet fx = bandpass(x, 1.0, 45.0, 101);
    EpochSet fy = bandpass(y, 1.0, 45.0, 101);
    for (std::size_t i = 0; i < fc.data.v.size(); ++i)
        CHECK(std::abs(fc.data.v[i] - (a * fx.data.v[i] + b * fy.data.v[i])) < 1e-9);
}

TEST_CASE("epoch_split counts and shapes") {
    const double fs = 500.0;
    Mat rec(2, static_cast<std::size_t>(12.5 * fs));
    EpochSet out = epoch_split(rec, fs, 5.0);
    CHECK(out.n_epochs() == 2);
    CHECK(out.n_samples() == 2500);

    Mat one(2, 2500);
    CHECK(epoch_split(one, fs, 5.0).n_epochs() == 1);
    CHECK(epoch_split(one, fs, 5.0).n_samples() == 2500);

    Mat small(2, static_cast<std::size_t>(4.9 * fs));
    CHECK(epoch_split(small, fs, 5.0).n_epochs() == 0);
}

TEST_CASE("epoch_split count formula on randomized lengths") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> len(0, 9999);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = len(rng);
        Mat rec(1, n);
        EpochSet out = epoch_split(rec, 100.0, 2.0);
        CHECK(out.n_epochs() == n / 200);
    }
    // content is preserved in order
    Mat rec(1, 10);
    for (std::size_t i = 0; i < 10; ++i) rec.at(0, i) = static_cast<double>(i);
    EpochSet out = epoch_split(rec, 2.0, 2.0);  // epochs of 4 samples
    REQUIRE(out.n_epochs() == 2);
    CHECK(out.data.at(0, 0, 3) == 3.0);
    CHECK(out.data.at(1, 0, 0) == 4.0);
}

TEST_CASE("zscore examples") {
    EpochSet s = make_set(1, 2, 3, 10.0);
    s.data.v = {1.0, 2.0, 3.0, 5.0, 5.0, 5.0};
    EpochSet out = zscore(s);
    CHECK(out.data.v[0] == doctest::Approx(-1.2247448).epsilon(1e-6));
    CHECK(out.data.v[1] == doctest::Approx(0.0));
    CHECK(out.data.v[2] == doctest::Approx(1.2247448).epsilon(1e-6));
    CHECK(out.data.v[3] == 0.0);  // constant trace maps to zero
    CHECK(out.data.v[4] == 0.0);
    CHECK(out.data.v[5] == 0.0);

    // idempotence
    EpochSet again = zscore(out);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs(again.data.v[i] - out.data.v[i]) < 1e-9);
}

TEST_CASE("zscore normalizes every trace") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(3.0, 7.0);
    EpochSet s = make_set(4, 3, 200, 100.0);
    for (auto& v : s.data.v) v = g(rng);
    EpochSet out = zscore(s);
    for (std::size_t e = 0; e < 4; ++e)
        for (std::size_t c = 0; c < 3; ++c) {
            const double* x = &out.data.v[(e * 3 + c) * 200];
            double mean = 0.0, var = 0.0;
            for (std::size_t i = 0; i < 200; ++i) mean += x[i];
            mean /= 200.0;
            for (std::size_t i = 0; i < 200; ++i) var += (x[i] - mean) * (x[i] - mean);
            var /= 200.0;
            CHECK(std::abs(mean) < 1e-6);
            CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
        }
}

TEST_CASE("subset and concat preserve metadata") {
    EpochSet s = make_set(4, 2, 16, 100.0);
    s.labels = std::vector<int>{0, 1, 0, 1};
    s.subject_ids = {10, 11, 12, 13};
    for (std::size_t i = 0; i < s.data.v.size(); ++i) s.data.v[i] = static_cast<double>(i);
    EpochSet sub = subset(s, {3, 1});
    CHECK(sub.n_epochs() == 2);
    CHECK(sub.subject_ids[0] == 13);
    CHECK((*sub.labels)[1] == 1);
    CHECK(sub.data.at(0, 0, 0) == s.data.at(3, 0, 0));

    EpochSet joined = concat(sub, sub);
    CHECK(joined.n_epochs() == 4);
    CHECK(joined.subject_ids[2] == 13);
}
