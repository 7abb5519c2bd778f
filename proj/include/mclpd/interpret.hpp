#pragma once
// Perturbation-based importance analysis: frequency-band removal, channel
// masking, and temporal-window occlusion, each scored by the accuracy drop it
// causes on a fixed test set. Perturbations are deterministic.

#include <map>
#include <string>
#include <vector>

#include "mclpd/encoder.hpp"
#include "mclpd/pipeline.hpp"
#include "mclpd/signal.hpp"

namespace mclpd {

struct ImportanceReport {
    double baseline_accuracy = 0.0;
    // score := baseline_accuracy - perturbed_accuracy (may be negative)
    std::map<std::string, double> band_scores;     // delta/theta/alpha/beta/gamma
    std::map<std::string, double> channel_scores;  // by channel name
    std::vector<double> window_scores;             // exactly 10 entries
};

// Zero the FFT bins inside [lo, hi) on every channel and invert.
EpochSet remove_band(const EpochSet& data, double lo_hz, double hi_hz);
// Zero one channel everywhere.
EpochSet mask_channel(const EpochSet& data, std::size_t channel);
// Zero window w of 10 across all channels; the final window absorbs any
// remainder when n_samples is not divisible by 10.
EpochSet occlude_window(const EpochSet& data, std::size_t window);

double band_importance(ModelParams& model, const EpochSet& test, const std::string& band);
double channel_importance(ModelParams& model, const EpochSet& test, const std::string& channel);
double window_importance(ModelParams& model, const EpochSet& test, std::size_t window);

// Full report over the five canonical bands, every channel, and all 10
// windows.
ImportanceReport importance_report(ModelParams& model, const EpochSet& test);

// CSV rows: dimension,name,accuracy_drop,pct_of_total_drop
std::string report_csv(const ImportanceReport& r);
// Simple standalone bar chart per dimension ("band", "channel", "window").
std::string report_svg(const ImportanceReport& r, const std::string& dimension);

}  // namespace mclpd
