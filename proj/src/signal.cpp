#include "mclpd/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace mclpd {

void EpochSet::validate() const {
    if (data.rank() != 3) throw std::invalid_argument("EpochSet: data must be rank 3");
    if (fs <= 0) throw std::invalid_argument("EpochSet: fs must be positive");
    if (subject_ids.size() != n_epochs())
        throw std::invalid_argument("EpochSet: subject_ids length mismatch");
    if (labels) {
        if (labels->size() != n_epochs())
            throw std::invalid_argument("EpochSet: labels length mismatch");
        for (int l : *labels)
            if (l != 0 && l != 1) throw std::invalid_argument("EpochSet: labels must be 0/1");
    }
    if (!channel_names.empty() && channel_names.size() != n_channels())
        throw std::invalid_argument("EpochSet: channel_names length mismatch");
}

// ---- FFT (FFTW baked behind the module contract) ---------------------------

namespace {

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
};

// Plans are created once per length under a lock and executed through the
// new-array interface, which is safe across threads. FFTW_UNALIGNED lets us
// run directly on std::vector storage. FFTW_ESTIMATE keeps planning
// deterministic.
PlanPair& plan_for(std::size_t n) {
    static std::mutex mu;
    static std::unordered_map<std::size_t, PlanPair> cache;
    std::lock_guard<std::mutex> g(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> rbuf(n);
    std::vector<std::complex<double>> cbuf(n / 2 + 1);
    PlanPair p;
    p.fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), rbuf.data(),
                                 reinterpret_cast<fftw_complex*>(cbuf.data()),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    p.inv = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                 reinterpret_cast<fftw_complex*>(cbuf.data()), rbuf.data(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p.fwd || !p.inv) throw std::runtime_error("fftw plan creation failed");
    return cache.emplace(n, p).first->second;
}

}  // namespace

std::vector<std::complex<double>> rfft_complex(const double* x, std::size_t n) {
    if (n < 2) throw std::invalid_argument("rfft: n_samples must be >= 2");
    PlanPair& p = plan_for(n);
    std::vector<double> in(x, x + n);  // r2c may clobber input
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_execute_dft_r2c(p.fwd, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<double> irfft_complex(const std::complex<double>* X, std::size_t n_bins,
                                  std::size_t n) {
    if (n_bins != n / 2 + 1) throw std::invalid_argument("irfft: bin count mismatch");
    PlanPair& p = plan_for(n);
    std::vector<std::complex<double>> in(X, X + n_bins);  // c2r clobbers input
    std::vector<double> out(n);
    fftw_execute_dft_c2r(p.inv, reinterpret_cast<fftw_complex*>(in.data()), out.data());
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= inv_n;
    return out;
}

Spectrum rfft(const Mat& x, double fs) {
    const std::size_t n = x.cols;
    const std::size_t bins = n / 2 + 1;
    Spectrum s;
    s.magnitude = Mat(x.rows, bins);
    s.phase = Mat(x.rows, bins);
    s.bin_hz = fs / static_cast<double>(n);
    s.n_samples = n;
    for (std::size_t c = 0; c < x.rows; ++c) {
        auto X = rfft_complex(x.row(c), n);
        for (std::size_t k = 0; k < bins; ++k) {
            s.magnitude.at(c, k) = std::abs(X[k]);
            s.phase.at(c, k) = std::arg(X[k]);
        }
    }
    return s;
}

Mat irfft(const Spectrum& s) {
    const std::size_t n = s.n_samples;
    const std::size_t bins = n / 2 + 1;
    if (s.magnitude.cols != bins || s.phase.cols != bins)
        throw std::invalid_argument("irfft: spectrum bin count mismatch");
    Mat out(s.magnitude.rows, n);
    std::vector<std::complex<double>> X(bins);
    for (std::size_t c = 0; c < s.magnitude.rows; ++c) {
        for (std::size_t k = 0; k < bins; ++k)
            X[k] = std::polar(s.magnitude.at(c, k), s.phase.at(c, k));
        auto x = irfft_complex(X.data(), bins, n);
        std::memcpy(out.row(c), x.data(), n * sizeof(double));
    }
    return out;
}

// ---- FIR band-pass ----------------------------------------------------------

std::vector<double> design_bandpass(double lo_hz, double hi_hz, double fs, std::size_t taps) {
    if (!(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0))
        throw std::invalid_argument("bandpass: require 0 < lo < hi < fs/2");
    if (taps % 2 == 0 || taps < 3) throw std::invalid_argument("bandpass: taps must be odd >= 3");

    const double f1 = lo_hz / fs;
    const double f2 = hi_hz / fs;
    const auto mid = static_cast<double>(taps - 1) / 2.0;
    std::vector<double> h(taps);
    auto sinc = [](double x) {
        if (x == 0.0) return 1.0;
        const double px = std::numbers::pi * x;
        return std::sin(px) / px;
    };
    for (std::size_t i = 0; i < taps; ++i) {
        const double m = static_cast<double>(i) - mid;
        const double ideal = 2.0 * f2 * sinc(2.0 * f2 * m) - 2.0 * f1 * sinc(2.0 * f1 * m);
        const double w =
            0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                   static_cast<double>(taps - 1));
        h[i] = ideal * w;
    }
    return h;
}

namespace {

// y[t] = sum_k h[k] * x[t + delay - k], x zero outside [0, n).
void fir_same(const double* x, double* y, std::size_t n, const std::vector<double>& h) {
    const std::size_t taps = h.size();
    const std::ptrdiff_t delay = static_cast<std::ptrdiff_t>((taps - 1) / 2);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(t) + delay;
        const std::size_t k_lo =
            base >= static_cast<std::ptrdiff_t>(n) ? static_cast<std::size_t>(base - (n - 1)) : 0;
        const std::size_t k_hi = std::min<std::size_t>(taps - 1, static_cast<std::size_t>(base));
        for (std::size_t k = k_lo; k <= k_hi; ++k)
            acc += h[k] * x[static_cast<std::size_t>(base) - k];
        y[t] = acc;
    }
}

}  // namespace

EpochSet bandpass(const EpochSet& x, double lo_hz, double hi_hz, std::size_t taps) {
    x.validate();
    const auto h = design_bandpass(lo_hz, hi_hz, x.fs, taps);
    EpochSet out = x;
    const std::size_t n = x.n_samples();
    std::vector<double> tmp(n);
    for (std::size_t e = 0; e < x.n_epochs(); ++e) {
        for (std::size_t c = 0; c < x.n_channels(); ++c) {
            const double* src = &x.data.v[(e * x.n_channels() + c) * n];
            fir_same(src, tmp.data(), n, h);
            std::memcpy(&out.data.v[(e * x.n_channels() + c) * n], tmp.data(),
                        n * sizeof(double));
        }
    }
    return out;
}

EpochSet epoch_split(const Mat& record, double fs, double dur, int subject_id,
                     std::optional<int> label, std::vector<std::string> channel_names) {
    if (dur <= 0) throw std::invalid_argument("epoch_split: dur must be positive");
    if (fs <= 0) throw std::invalid_argument("epoch_split: fs must be positive");
    const std::size_t epoch_len = static_cast<std::size_t>(fs * dur + 0.5);
    const std::size_t n_epochs = epoch_len == 0 ? 0 : record.cols / epoch_len;
    EpochSet out;
    out.fs = fs;
    out.data = Tensor({n_epochs, record.rows, epoch_len});
    out.subject_ids.assign(n_epochs, subject_id);
    if (label) out.labels = std::vector<int>(n_epochs, *label);
    out.channel_names = std::move(channel_names);
    for (std::size_t e = 0; e < n_epochs; ++e)
        for (std::size_t c = 0; c < record.rows; ++c)
            std::memcpy(&out.data.v[(e * record.rows + c) * epoch_len],
                        record.row(c) + e * epoch_len, epoch_len * sizeof(double));
    return out;
}

void zscore_trace(double* x, std::size_t n) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd < 1e-12) {
        std::fill(x, x + n, 0.0);
        return;
    }
    const double inv = 1.0 / sd;
    for (std::size_t i = 0; i < n; ++i) x[i] = (x[i] - mean) * inv;
}

EpochSet zscore(const EpochSet& x) {
    x.validate();
    EpochSet out = x;
    const std::size_t n = x.n_samples();
    for (std::size_t e = 0; e < x.n_epochs(); ++e)
        for (std::size_t c = 0; c < x.n_channels(); ++c)
            zscore_trace(&out.data.v[(e * x.n_channels() + c) * n], n);
    return out;
}

EpochSet subset(const EpochSet& x, const std::vector<std::size_t>& idx) {
    const std::size_t c = x.n_channels(), t = x.n_samples();
    EpochSet out;
    out.fs = x.fs;
    out.channel_names = x.channel_names;
    out.data = Tensor({idx.size(), c, t});
    out.subject_ids.resize(idx.size());
    if (x.labels) out.labels = std::vector<int>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t e = idx[i];
        if (e >= x.n_epochs()) throw std::out_of_range("subset: epoch index out of range");
        std::memcpy(&out.data.v[i * c * t], &x.data.v[e * c * t], c * t * sizeof(double));
        out.subject_ids[i] = x.subject_ids[e];
        if (x.labels) (*out.labels)[i] = (*x.labels)[e];
    }
    return out;
}

EpochSet concat(const EpochSet& a, const EpochSet& b) {
    if (a.n_epochs() == 0) return b;
    if (b.n_epochs() == 0) return a;
    if (a.n_channels() != b.n_channels() || a.n_samples() != b.n_samples() || a.fs != b.fs)
        throw std::invalid_argument("concat: incompatible epoch sets");
    if (a.labels.has_value() != b.labels.has_value())
        throw std::invalid_argument("concat: label presence mismatch");
    EpochSet out = a;
    out.data.shape[0] = a.n_epochs() + b.n_epochs();
    out.data.v.insert(out.data.v.end(), b.data.v.begin(), b.data.v.end());
    out.subject_ids.insert(out.subject_ids.end(), b.subject_ids.begin(), b.subject_ids.end());
    if (a.labels) out.labels->insert(out.labels->end(), b.labels->begin(), b.labels->end());
    return out;
}

}  // namespace mclpd
