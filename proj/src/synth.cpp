#include "mclpd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "mclpd/augment.hpp"
#include "mclpd/rng.hpp"

namespace mclpd {

const std::vector<std::string>& default_channel_names() {
    static const std::vector<std::string> names = {
        "Fp1", "Fp2", "F7", "F3", "Fz",  "F4",  "F8",  "FC5", "FC1", "FC2",
        "FC6", "T7",  "C3", "Cz", "C4",  "T8",  "CP5", "CP1", "CP2", "CP6",
        "P7",  "P3",  "Pz", "P4", "P8",  "O1",  "Oz",  "O2",  "PO3", "PO4"};
    return names;
}

const std::vector<std::string>& default_signature_channels() {
    static const std::vector<std::string> names = {"FC1", "FC2", "C3",  "Cz",
                                                   "C4",  "CP1", "CP2", "Pz"};
    return names;
}

SynthSpec default_spec(const std::string& site_name, std::uint64_t seed) {
    SynthSpec spec;
    spec.seed = seed;
    spec.signature_channels = default_signature_channels();
    if (site_name == "siteA") {
        spec.site = {"siteA", 1.0, 0.05, 0.0};
        spec.subject_id_offset = 0;
    } else if (site_name == "siteB") {
        spec.site = {"siteB", 1.2, 0.08, 0.3};
        spec.subject_id_offset = 1000;
    } else if (site_name == "siteC") {
        spec.site = {"siteC", 0.8, 0.12, 0.6};
        spec.subject_id_offset = 2000;
    } else {
        throw std::invalid_argument("default_spec: unknown site " + site_name);
    }
    return spec;
}

namespace {

struct BandProfile {
    double lo, hi;
    double amplitude;  // sinusoid amplitude before per-subject jitter
    double jitter;     // half-width of the per-subject amplitude jitter
};

// EEG-flavored rhythm mix on top of the 1/f background. The beta band
// carries the class signature, so its between-subject jitter is kept small
// to preserve the configured class power ratio.
const std::vector<BandProfile>& band_profiles() {
    static const std::vector<BandProfile> p = {
        {0.5, 4.0, 1.0, 0.15},   // delta
        {4.0, 8.0, 0.8, 0.15},   // theta
        {8.0, 13.0, 1.2, 0.15},  // alpha
        {13.0, 30.0, 0.8, 0.05}, // beta
        {30.0, 45.0, 0.3, 0.15}, // gamma
    };
    return p;
}

// Pink (1/f) noise with unit std, synthesized in the frequency domain.
std::vector<double> pink_noise(std::size_t n, double fs, Rng& rng) {
    const std::size_t bins = n / 2 + 1;
    std::vector<std::complex<double>> spec(bins, {0.0, 0.0});
    std::normal_distribution<double> g(0.0, 1.0);
    const double bin_hz = fs / static_cast<double>(n);
    for (std::size_t k = 1; k < bins; ++k) {
        const double f = bin_hz * static_cast<double>(k);
        const double shape = 1.0 / std::sqrt(std::max(f, bin_hz));
        const bool nyquist = (n % 2 == 0 && k == bins - 1);
        if (nyquist)
            spec[k] = {g(rng) * shape, 0.0};
        else
            spec[k] = {g(rng) * shape, g(rng) * shape};
    }
    auto x = irfft_complex(spec.data(), bins, n);
    zscore_trace(x.data(), n);  // unit power background
    return x;
}

void scale_band_bins(std::vector<std::complex<double>>& spec, double bin_hz, double lo,
                     double hi, double factor) {
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const double f = bin_hz * static_cast<double>(k);
        if (f >= lo && f < hi) spec[k] *= factor;
    }
}

}  // namespace

EpochSet generate(const SynthSpec& spec) {
    if (spec.n_channels == 0 || spec.n_subjects_per_class == 0 || spec.epochs_per_subject == 0)
        throw std::invalid_argument("generate: empty spec");
    const std::size_t t = static_cast<std::size_t>(spec.fs * spec.dur + 0.5);
    const std::size_t n_sub = 2 * spec.n_subjects_per_class;
    const std::size_t n_epochs = spec.n_epochs();

    std::vector<std::string> names = default_channel_names();
    if (spec.n_channels <= names.size())
        names.resize(spec.n_channels);
    else
        for (std::size_t c = names.size(); c < spec.n_channels; ++c)
            names.push_back("CH" + std::to_string(c));
    const auto& sig_names =
        spec.signature_channels.empty() ? default_signature_channels() : spec.signature_channels;
    std::vector<bool> is_signature(spec.n_channels, false);
    std::size_t n_matched = 0;
    for (const auto& s : sig_names) {
        auto it = std::find(names.begin(), names.end(), s);
        if (it != names.end()) {
            is_signature[static_cast<std::size_t>(it - names.begin())] = true;
            ++n_matched;
        }
    }
    if (spec.beta_multiplier != 1.0 && n_matched == 0)
        throw std::invalid_argument("generate: no signature channel matches the montage");

    EpochSet out;
    out.fs = spec.fs;
    out.channel_names = names;
    out.data = Tensor({n_epochs, spec.n_channels, t});
    out.subject_ids.resize(n_epochs);
    out.labels = std::vector<int>(n_epochs);

    const double bin_hz = spec.fs / static_cast<double>(t);
    const std::size_t bins = t / 2 + 1;
    const double boost = std::sqrt(spec.beta_multiplier);

    // Site-level fixed per-channel gain jitter.
    Rng site_rng = make_rng(spec.seed, stream::kSynth, 0xC0DE);
    std::vector<double> chan_gain(spec.n_channels);
    {
        std::uniform_real_distribution<double> u(0.9, 1.1);
        for (auto& g : chan_gain) g = spec.site.gain * u(site_rng);
    }

    std::size_t epoch_index = 0;
    for (std::size_t s = 0; s < n_sub; ++s) {
        const int label = s < spec.n_subjects_per_class ? 0 : 1;
        const int subject_id = spec.subject_id_offset + static_cast<int>(s);
        // Per-subject rhythm variability: amplitude jitter and a fixed
        // per-band carrier frequency.
        Rng subj_rng = make_rng(spec.seed, stream::kSynth, 1 + s);
        std::vector<double> band_amp;
        for (const auto& bp : band_profiles()) {
            std::uniform_real_distribution<double> amp_jit(1.0 - bp.jitter, 1.0 + bp.jitter);
            band_amp.push_back(bp.amplitude * amp_jit(subj_rng));
        }
        for (std::size_t e = 0; e < spec.epochs_per_subject; ++e, ++epoch_index) {
            Rng rng = make_rng(spec.seed, stream::kSynth, 1 + s, 1 + e);
            std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
            std::normal_distribution<double> floor_noise(0.0, spec.site.noise_floor);
            // rhythm carriers drift from epoch to epoch
            std::vector<double> band_freq;
            for (const auto& bp : band_profiles()) {
                std::uniform_real_distribution<double> fj(bp.lo + 0.15 * (bp.hi - bp.lo),
                                                          bp.hi - 0.15 * (bp.hi - bp.lo));
                band_freq.push_back(fj(rng));
            }
            for (std::size_t c = 0; c < spec.n_channels; ++c) {
                std::vector<double> x = pink_noise(t, spec.fs, rng);
                for (std::size_t b = 0; b < band_profiles().size(); ++b) {
                    const double ph = phase(rng);
                    const double w = 2.0 * std::numbers::pi * band_freq[b] / spec.fs;
                    for (std::size_t i = 0; i < t; ++i)
                        x[i] += band_amp[b] * std::sin(w * static_cast<double>(i) + ph);
                }
                if (label == 1 && is_signature[c] && spec.beta_multiplier != 1.0) {
                    auto spec_c = rfft_complex(x.data(), t);
                    scale_band_bins(spec_c, bin_hz, spec.beta_lo_hz, spec.beta_hi_hz, boost);
                    x = irfft_complex(spec_c.data(), bins, t);
                }
                const double line_ph = phase(rng);
                double* dst = &out.data.v[(epoch_index * spec.n_channels + c) * t];
                const double lw = 2.0 * std::numbers::pi * 50.0 / spec.fs;
                for (std::size_t i = 0; i < t; ++i) {
                    double v = x[i] * chan_gain[c];
                    if (spec.site.line_noise_amp > 0.0)
                        v += spec.site.line_noise_amp *
                             std::sin(lw * static_cast<double>(i) + line_ph);
                    v += floor_noise(rng);
                    dst[i] = v;
                }
            }
            out.subject_ids[epoch_index] = subject_id;
            (*out.labels)[epoch_index] = label;
        }
    }

    // PSD verification of the construction: the class-1 / class-0 beta-power
    // ratio on signature channels must track the configured multiplier. The
    // check needs enough epochs per class for the estimate to concentrate.
    if (spec.beta_multiplier >= 1.5 &&
        spec.n_subjects_per_class * spec.epochs_per_subject >= 50) {
        double p0 = 0.0, p1 = 0.0;
        std::size_t c0 = 0, c1 = 0;
        for (std::size_t e = 0; e < n_epochs; ++e) {
            double acc = 0.0;
            std::size_t n_sig = 0;
            for (std::size_t c = 0; c < spec.n_channels; ++c) {
                if (!is_signature[c]) continue;
                acc += band_power(&out.data.v[(e * spec.n_channels + c) * t], t, spec.fs,
                                  spec.beta_lo_hz, spec.beta_hi_hz);
                ++n_sig;
            }
            if (n_sig == 0) break;
            acc /= static_cast<double>(n_sig);
            if ((*out.labels)[e] == 0) {
                p0 += acc;
                ++c0;
            } else {
                p1 += acc;
                ++c1;
            }
        }
        if (c0 > 0 && c1 > 0) {
            const double ratio = (p1 / static_cast<double>(c1)) / (p0 / static_cast<double>(c0));
            if (ratio < 0.8 * spec.beta_multiplier || ratio > 1.25 * spec.beta_multiplier)
                throw std::runtime_error("generate: class beta-power ratio " +
                                         std::to_string(ratio) + " off target");
        }
    }
    return out;
}

double band_power(const double* x, std::size_t n, double fs, double lo_hz, double hi_hz) {
    auto spec = rfft_complex(x, n);
    const double bin_hz = fs / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const double f = bin_hz * static_cast<double>(k);
        if (f >= lo_hz && f < hi_hz) acc += std::norm(spec[k]);
    }
    return acc;
}

std::vector<double> beta_signature_scores(const EpochSet& data,
                                          const std::vector<std::string>& channels,
                                          double beta_lo, double beta_hi) {
    data.validate();
    std::vector<std::size_t> idx;
    for (const auto& name : channels) {
        auto it = std::find(data.channel_names.begin(), data.channel_names.end(), name);
        if (it != data.channel_names.end())
            idx.push_back(static_cast<std::size_t>(it - data.channel_names.begin()));
    }
    if (idx.empty()) throw std::invalid_argument("beta_signature_scores: no channels matched");
    const std::size_t t = data.n_samples();
    std::vector<double> scores(data.n_epochs(), 0.0);
    for (std::size_t e = 0; e < data.n_epochs(); ++e) {
        double acc = 0.0;
        for (std::size_t c : idx) {
            const double* x = &data.data.v[(e * data.n_channels() + c) * t];
            const double beta = band_power(x, t, data.fs, beta_lo, beta_hi);
            const double total = band_power(x, t, data.fs, 1.0, 45.0);
            acc += total > 0.0 ? beta / total : 0.0;
        }
        scores[e] = acc / static_cast<double>(idx.size());
    }
    return scores;
}

std::vector<int> beta_threshold_predictions(const EpochSet& data,
                                            const std::vector<std::string>& channels,
                                            double beta_lo, double beta_hi) {
    auto scores = beta_signature_scores(data, channels, beta_lo, beta_hi);
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const double thr = sorted[sorted.size() / 2];
    std::vector<int> preds(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) preds[i] = scores[i] > thr ? 1 : 0;
    return preds;
}

}  // namespace mclpd
