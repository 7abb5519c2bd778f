#pragma once
// Core EEG data types and preprocessing: FIR band-pass filtering, epoching,
// per-trace standardization, and real FFT utilities.
//
// FFT convention used everywhere in this library: forward transform is
// unnormalized, the inverse divides by the signal length T.

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "mclpd/tensor.hpp"

namespace mclpd {

// A batch of fixed-length multi-channel EEG epochs. data is
// [n_epochs x n_channels x n_samples]; labels (when present) are 0 control,
// 1 PD; subject_ids group epochs by recording subject.
struct EpochSet {
    Tensor data;  // rank 3
    double fs = 0.0;
    std::optional<std::vector<int>> labels;
    std::vector<int> subject_ids;
    std::vector<std::string> channel_names;

    std::size_t n_epochs() const { return data.rank() == 3 ? data.dim(0) : 0; }
    std::size_t n_channels() const { return data.rank() == 3 ? data.dim(1) : 0; }
    std::size_t n_samples() const { return data.rank() == 3 ? data.dim(2) : 0; }

    // Throws if shapes/labels/ids are inconsistent.
    void validate() const;
};

// One-sided spectra of a [n_channels x n_samples] signal block.
// n_bins = n_samples/2 + 1; bin k sits at frequency k * bin_hz.
struct Spectrum {
    Mat magnitude;  // [n_channels x n_bins], element-wise non-negative
    Mat phase;      // [n_channels x n_bins]
    double bin_hz = 0.0;
    std::size_t n_samples = 0;  // original length, needed for inversion
};

// ---- real FFT -------------------------------------------------------------

// Forward real FFT of each row; unnormalized.
std::vector<std::complex<double>> rfft_complex(const double* x, std::size_t n);
// Inverse of rfft_complex; divides by n.
std::vector<double> irfft_complex(const std::complex<double>* X, std::size_t n_bins,
                                  std::size_t n);

Spectrum rfft(const Mat& x, double fs);
Mat irfft(const Spectrum& s);

// ---- preprocessing --------------------------------------------------------

// Hamming-windowed sinc band-pass taps; `taps` must be odd.
std::vector<double> design_bandpass(double lo_hz, double hi_hz, double fs, std::size_t taps);

// Zero-phase application of the linear-phase FIR (group delay compensated,
// zero-padded edges). Shape preserved.
EpochSet bandpass(const EpochSet& x, double lo_hz, double hi_hz, std::size_t taps = 501);

// Split a continuous [n_channels x record_len] recording into non-overlapping
// epochs of `dur` seconds; trailing remainder discarded. A record shorter
// than one epoch yields an empty EpochSet.
EpochSet epoch_split(const Mat& record, double fs, double dur,
                     int subject_id = 0, std::optional<int> label = {},
                     std::vector<std::string> channel_names = {});

// Per-(epoch, channel) standardization with population sigma; traces with
// sigma < 1e-12 map to all-zero.
EpochSet zscore(const EpochSet& x);
void zscore_trace(double* x, std::size_t n);

// Gather a subset of epochs by index.
EpochSet subset(const EpochSet& x, const std::vector<std::size_t>& idx);

// Concatenate epoch sets with identical channel layout and rate.
EpochSet concat(const EpochSet& a, const EpochSet& b);

}  // namespace mclpd
