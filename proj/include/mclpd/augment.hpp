#pragma once
// The seven time/frequency augmentation operators. Each operator is a
// deterministic function of (signal, concrete parameters, noise stream) and
// preserves the [n_channels x n_samples] shape. Frequency-domain operators
// work on the one-sided spectrum with DC/Nyquist handled so outputs stay real.

#include <cstdint>
#include <string>
#include <vector>

#include "mclpd/rng.hpp"
#include "mclpd/tensor.hpp"

namespace mclpd {

enum class AugKind : int {
    GaussianNoise = 0,
    TimeShift,
    AmplitudeScale,
    RandomMask,
    FrequencyShift,
    SpectralScale,
    BandNoise,
};
constexpr int kNumAugKinds = 7;

const char* aug_kind_name(AugKind k);
AugKind aug_kind_from_name(const std::string& name);

// Parameter ranges an operator samples its concrete parameters from.
struct AugOp {
    AugKind kind;
    // kind-specific ranges; unused fields ignored.
    double sigma_lo = 0.05, sigma_hi = 0.2;   // GaussianNoise
    long shift_max = 50;                      // TimeShift (samples)
    double scale_lo = 0.8, scale_hi = 1.2;    // AmplitudeScale
    std::size_t mask_len = 10;                // RandomMask
    double fshift_max = 2.0;                  // FrequencyShift (radians)
    double sscale_lo = 0.5, sscale_hi = 1.5;  // SpectralScale
    double band_sigma = 0.1;                  // BandNoise (time-domain-equivalent std)
    double fs = 500.0;                        // BandNoise band bookkeeping
};

// Shared operator parameter defaults; the seven-op catalog.
struct AugmentConfig {
    double sigma_lo = 0.05, sigma_hi = 0.2;
    long shift_max = 50;
    double scale_lo = 0.8, scale_hi = 1.2;
    std::size_t mask_len = 10;
    double fshift_max = 2.0;
    double sscale_lo = 0.5, sscale_hi = 1.5;
    double band_sigma = 0.1;
    double fs = 500.0;
};
std::vector<AugOp> default_ops(const AugmentConfig& cfg = {});

// One applied operator with its concrete sampled parameters.
struct AppliedOp {
    AugKind kind;
    std::vector<double> params;
};

// Reproducibility record: replaying `applied` with `rng_seed` on the same
// input reproduces `output` bit-exactly.
struct AugOutcome {
    Mat output;
    std::vector<AppliedOp> applied;
    std::uint64_t rng_seed = 0;
};

// ---- individual operators (x is [n_channels x n_samples]) -----------------
Mat gaussian_noise(const Mat& x, double sigma, Rng& rng);
Mat time_shift(const Mat& x, long delta);
Mat amplitude_scale(const Mat& x, double alpha);
Mat random_mask(const Mat& x, std::size_t t_s, std::size_t t_e);
Mat frequency_shift(const Mat& x, double dphi);
Mat spectral_scale(const Mat& x, double beta);
// Complex Gaussian noise added to spectrum bins inside [f_lo, f_hi); per
// two-sided bin variance sigma^2 * T so a full-band mask injects noise of
// time-domain std sigma under the unnormalized-forward convention.
Mat band_noise(const Mat& x, double f_lo, double f_hi, double sigma, double fs, Rng& rng);

// Apply one operator from its concrete parameter vector.
Mat apply_concrete(AugKind kind, const std::vector<double>& params, const Mat& x,
                   Rng& noise_rng);

// Sample concrete parameters for each op in `plan` and apply them
// left-to-right. Parameter draws and noise draws use separate streams derived
// from `seed` so replay_outcome() can reuse the noise stream alone.
AugOutcome compose(const std::vector<AugOp>& plan, const Mat& x, std::uint64_t seed);

// Re-apply a recorded outcome to an input; bit-exact against the original.
Mat replay_outcome(const std::vector<AppliedOp>& applied, std::uint64_t seed, const Mat& x);

// Canonical EEG bands used by BandNoise sampling and interpretability.
struct Band {
    const char* name;
    double lo_hz, hi_hz;
};
// delta/theta/alpha/beta plus gamma capped at 45 Hz (the pre-filter edge).
const std::vector<Band>& canonical_bands();

}  // namespace mclpd
