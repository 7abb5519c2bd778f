#include "mclpd/augment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "mclpd/signal.hpp"

namespace mclpd {

const char* aug_kind_name(AugKind k) {
    switch (k) {
        case AugKind::GaussianNoise: return "gaussian_noise";
        case AugKind::TimeShift: return "time_shift";
        case AugKind::AmplitudeScale: return "amplitude_scale";
        case AugKind::RandomMask: return "random_mask";
        case AugKind::FrequencyShift: return "frequency_shift";
        case AugKind::SpectralScale: return "spectral_scale";
        case AugKind::BandNoise: return "band_noise";
    }
    return "?";
}

AugKind aug_kind_from_name(const std::string& name) {
    for (int i = 0; i < kNumAugKinds; ++i)
        if (name == aug_kind_name(static_cast<AugKind>(i))) return static_cast<AugKind>(i);
    throw std::invalid_argument("unknown augmentation kind: " + name);
}

std::vector<AugOp> default_ops(const AugmentConfig& cfg) {
    std::vector<AugOp> ops(kNumAugKinds);
    for (int i = 0; i < kNumAugKinds; ++i) {
        AugOp& op = ops[i];
        op.kind = static_cast<AugKind>(i);
        op.sigma_lo = cfg.sigma_lo;
        op.sigma_hi = cfg.sigma_hi;
        op.shift_max = cfg.shift_max;
        op.scale_lo = cfg.scale_lo;
        op.scale_hi = cfg.scale_hi;
        op.mask_len = cfg.mask_len;
        op.fshift_max = cfg.fshift_max;
        op.sscale_lo = cfg.sscale_lo;
        op.sscale_hi = cfg.sscale_hi;
        op.band_sigma = cfg.band_sigma;
        op.fs = cfg.fs;
    }
    return ops;
}

const std::vector<Band>& canonical_bands() {
    static const std::vector<Band> bands = {
        {"delta", 0.5, 4.0}, {"theta", 4.0, 8.0}, {"alpha", 8.0, 13.0},
        {"beta", 13.0, 30.0}, {"gamma", 30.0, 45.0},
    };
    return bands;
}

Mat gaussian_noise(const Mat& x, double sigma, Rng& rng) {
    if (sigma < 0) throw std::invalid_argument("gaussian_noise: sigma must be >= 0");
    Mat out = x;
    if (sigma == 0.0) return out;
    std::normal_distribution<double> n(0.0, sigma);
    for (auto& v : out.v) v += n(rng);
    return out;
}

Mat time_shift(const Mat& x, long delta) {
    Mat out(x.rows, x.cols);
    const long L = static_cast<long>(x.cols);
    // x'(t) = x((t - delta) mod L)
    long off = ((-delta) % L + L) % L;  // source offset for t = 0
    for (std::size_t c = 0; c < x.rows; ++c) {
        const double* src = x.row(c);
        double* dst = out.row(c);
        for (long t = 0; t < L; ++t) dst[t] = src[(t + off) % L];
    }
    return out;
}

Mat amplitude_scale(const Mat& x, double alpha) {
    Mat out = x;
    for (auto& v : out.v) v *= alpha;
    return out;
}

Mat random_mask(const Mat& x, std::size_t t_s, std::size_t t_e) {
    if (!(t_s <= t_e && t_e < x.cols))
        throw std::invalid_argument("random_mask: require 0 <= t_s <= t_e < L");
    Mat out = x;
    for (std::size_t c = 0; c < x.rows; ++c)
        std::fill(out.row(c) + t_s, out.row(c) + t_e + 1, 0.0);
    return out;
}

Mat frequency_shift(const Mat& x, double dphi) {
    const std::size_t n = x.cols;
    const std::size_t bins = n / 2 + 1;
    const std::complex<double> rot = std::polar(1.0, dphi);
    Mat out(x.rows, n);
    for (std::size_t c = 0; c < x.rows; ++c) {
        auto X = rfft_complex(x.row(c), n);
        // Rotate positive-frequency bins only; DC (and Nyquist for even n)
        // must stay real for the output to stay real.
        const std::size_t last = (n % 2 == 0) ? bins - 1 : bins;
        for (std::size_t k = 1; k < last; ++k) X[k] *= rot;
        auto y = irfft_complex(X.data(), bins, n);
        std::copy(y.begin(), y.end(), out.row(c));
    }
    return out;
}

Mat spectral_scale(const Mat& x, double beta) {
    Mat out = x;
    for (auto& v : out.v) v *= beta;
    // beta * |X| * e^{j phi} == beta * X; the transform is linear, so the
    // spectral definition collapses to a time-domain scale. Kept as its own
    // operator because it samples from a different range.
    return out;
}

Mat band_noise(const Mat& x, double f_lo, double f_hi, double sigma, double fs, Rng& rng) {
    if (!(f_lo >= 0.0 && f_lo < f_hi && f_hi <= fs / 2.0))
        throw std::invalid_argument("band_noise: require 0 <= f_lo < f_hi <= fs/2");
    const std::size_t n = x.cols;
    const std::size_t bins = n / 2 + 1;
    Mat out(x.rows, n);
    if (sigma == 0.0) {
        out = x;
        return out;
    }
    const double bin_hz = fs / static_cast<double>(n);
    // Per two-sided bin, Z ~ CN(0, sigma^2 * T): component std sigma*sqrt(T/2).
    // The one-sided representation carries the conjugate image implicitly, so
    // a positive-frequency bin gets the full CN draw; DC/Nyquist are real-only.
    const double comp_sd = sigma * std::sqrt(static_cast<double>(n) / 2.0);
    std::normal_distribution<double> g(0.0, comp_sd);
    for (std::size_t c = 0; c < x.rows; ++c) {
        auto X = rfft_complex(x.row(c), n);
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = bin_hz * static_cast<double>(k);
            if (f < f_lo || f >= f_hi) continue;
            const bool self_conjugate = (k == 0) || (n % 2 == 0 && k == bins - 1);
            if (self_conjugate) {
                X[k] += std::complex<double>(g(rng) * std::numbers::sqrt2, 0.0);
            } else {
                X[k] += std::complex<double>(g(rng), g(rng));
            }
        }
        auto y = irfft_complex(X.data(), bins, n);
        std::copy(y.begin(), y.end(), out.row(c));
    }
    return out;
}

Mat apply_concrete(AugKind kind, const std::vector<double>& params, const Mat& x,
                   Rng& noise_rng) {
    switch (kind) {
        case AugKind::GaussianNoise:
            return gaussian_noise(x, params.at(0), noise_rng);
        case AugKind::TimeShift:
            return time_shift(x, static_cast<long>(params.at(0)));
        case AugKind::AmplitudeScale:
            return amplitude_scale(x, params.at(0));
        case AugKind::RandomMask:
            return random_mask(x, static_cast<std::size_t>(params.at(0)),
                               static_cast<std::size_t>(params.at(1)));
        case AugKind::FrequencyShift:
            return frequency_shift(x, params.at(0));
        case AugKind::SpectralScale:
            return spectral_scale(x, params.at(0));
        case AugKind::BandNoise:
            return band_noise(x, params.at(0), params.at(1), params.at(2), params.at(3),
                              noise_rng);
    }
    throw std::invalid_argument("apply_concrete: bad kind");
}

namespace {

AppliedOp sample_params(const AugOp& op, std::size_t n_samples, Rng& rng) {
    AppliedOp a{op.kind, {}};
    switch (op.kind) {
        case AugKind::GaussianNoise: {
            std::uniform_real_distribution<double> d(op.sigma_lo, op.sigma_hi);
            a.params = {d(rng)};
            break;
        }
        case AugKind::TimeShift: {
            std::uniform_int_distribution<long> d(-op.shift_max, op.shift_max);
            a.params = {static_cast<double>(d(rng))};
            break;
        }
        case AugKind::AmplitudeScale: {
            std::uniform_real_distribution<double> d(op.scale_lo, op.scale_hi);
            a.params = {d(rng)};
            break;
        }
        case AugKind::RandomMask: {
            const std::size_t len = std::min(op.mask_len, n_samples);
            std::uniform_int_distribution<std::size_t> d(0, n_samples - len);
            const std::size_t t_s = d(rng);
            a.params = {static_cast<double>(t_s), static_cast<double>(t_s + len - 1)};
            break;
        }
        case AugKind::FrequencyShift: {
            std::uniform_real_distribution<double> d(-op.fshift_max, op.fshift_max);
            a.params = {d(rng)};
            break;
        }
        case AugKind::SpectralScale: {
            std::uniform_real_distribution<double> d(op.sscale_lo, op.sscale_hi);
            a.params = {d(rng)};
            break;
        }
        case AugKind::BandNoise: {
            // One of the five canonical bands, chosen uniformly per application.
            const auto& bands = canonical_bands();
            std::uniform_int_distribution<std::size_t> d(0, bands.size() - 1);
            const Band& b = bands[d(rng)];
            a.params = {b.lo_hz, b.hi_hz, op.band_sigma, op.fs};
            break;
        }
    }
    return a;
}

}  // namespace

AugOutcome compose(const std::vector<AugOp>& plan, const Mat& x, std::uint64_t seed) {
    if (plan.empty()) throw std::invalid_argument("compose: plan must be non-empty");
    AugOutcome out;
    out.rng_seed = seed;
    Rng param_rng = make_rng(seed, stream::kAugParams);
    Rng noise_rng = make_rng(seed, stream::kAugNoise);
    Mat cur = x;
    for (const AugOp& op : plan) {
        AppliedOp a = sample_params(op, x.cols, param_rng);
        cur = apply_concrete(a.kind, a.params, cur, noise_rng);
        out.applied.push_back(std::move(a));
    }
    out.output = std::move(cur);
    return out;
}

Mat replay_outcome(const std::vector<AppliedOp>& applied, std::uint64_t seed, const Mat& x) {
    Rng noise_rng = make_rng(seed, stream::kAugNoise);
    Mat cur = x;
    for (const AppliedOp& a : applied) cur = apply_concrete(a.kind, a.params, cur, noise_rng);
    return cur;
}

}  // namespace mclpd
