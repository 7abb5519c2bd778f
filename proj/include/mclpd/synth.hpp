#pragma once
// Synthetic EEG generator: labeled multi-site datasets with a controllable
// beta-band class signature and per-site domain shift. Serves as the
// verification oracle for the training pipeline and interpretability.

#include <cstdint>
#include <string>
#include <vector>

#include "mclpd/signal.hpp"

namespace mclpd {

struct SiteProfile {
    std::string name = "siteA";
    double gain = 1.0;            // global acquisition gain
    double noise_floor = 0.05;    // white-noise std added on top
    double line_noise_amp = 0.0;  // 50 Hz mains amplitude
};

struct SynthSpec {
    std::size_t n_subjects_per_class = 20;
    std::size_t epochs_per_subject = 50;
    std::size_t n_channels = 30;
    double fs = 500.0;
    double dur = 5.0;
    // class-1 signature: in-band power multiplier on the signature channels
    double beta_multiplier = 2.0;
    double beta_lo_hz = 13.0, beta_hi_hz = 30.0;
    std::vector<std::string> signature_channels;  // empty -> default subset
    SiteProfile site;
    int subject_id_offset = 0;  // keeps subject ids distinct across sites
    std::uint64_t seed = 0;

    std::size_t n_epochs() const { return 2 * n_subjects_per_class * epochs_per_subject; }
};

// The 30-channel 10-20 montage used by default specs.
const std::vector<std::string>& default_channel_names();
const std::vector<std::string>& default_signature_channels();

// Site presets for the cross-dataset protocol: siteA (pre-training),
// siteB/siteC (fine-tuning targets) with gain and noise-floor shifts.
SynthSpec default_spec(const std::string& site_name, std::uint64_t seed);

// Pink-noise background + per-band sinusoids + class-dependent beta boost +
// site gain/line/floor effects. Labels and subject ids assigned; the class
// beta-power ratio is verified via PSD during generation.
EpochSet generate(const SynthSpec& spec);

// Sum of |X_k|^2 over bins with lo <= f < hi (unnormalized forward FFT).
double band_power(const double* x, std::size_t n, double fs, double lo_hz, double hi_hz);

// Per-epoch relative beta power averaged over the given channels
// (beta / total in-band 1..45 Hz); scale-invariant.
std::vector<double> beta_signature_scores(const EpochSet& data,
                                          const std::vector<std::string>& channels,
                                          double beta_lo = 13.0, double beta_hi = 30.0);

// Trivial oracle classifier: threshold the signature score at its median.
std::vector<int> beta_threshold_predictions(const EpochSet& data,
                                            const std::vector<std::string>& channels,
                                            double beta_lo = 13.0, double beta_hi = 30.0);

}  // namespace mclpd
