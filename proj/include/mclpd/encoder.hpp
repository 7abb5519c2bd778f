#pragma once
// Three-branch time/frequency/time-frequency encoder. Each branch is three
// Conv1d->BatchNorm->ReLU blocks followed by global average pooling, with an
// independent two-layer projection head per branch; a linear classification
// head sits on the time-frequency embedding for fine-tuning.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mclpd/nn.hpp"
#include "mclpd/rng.hpp"
#include "mclpd/tensor.hpp"

namespace mclpd {

enum class Branch : int { Time = 0, Freq, TimeFreq };
const char* branch_prefix(Branch b);

struct EncoderDims {
    std::size_t in_channels = 30;
    std::size_t widths[3] = {32, 64, 128};
    std::size_t kernels[3] = {7, 5, 3};
    std::size_t strides[3] = {2, 2, 2};
    std::size_t embed_dim = 128;   // == widths[2] after pooling
    std::size_t proj_hidden = 128;
    std::size_t proj_dim = 64;
    std::size_t n_classes = 2;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

struct Param {
    std::string name;
    int depth = 0;          // branch-local layer unit (conv blocks 1..3, heads 4)
    bool trainable = true;  // running stats are state, not optimized
    Tensor value;
    Tensor grad;
};

struct ParamSet {
    std::vector<Param> items;

    Param& add(const std::string& name, int depth, Tensor value, bool trainable = true);
    Param* find(const std::string& name);
    const Param* find(const std::string& name) const;
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    void zero_grads();
    bool grads_finite() const;
};

struct ModelParams {
    EncoderDims dims;
    ParamSet set;
};

ModelParams init_model(const EncoderDims& dims, std::uint64_t seed);
// Deep copy of values only (grads dropped).
ModelParams clone_values(const ModelParams& m);

// ---- forward/backward ------------------------------------------------------

struct BranchCache {
    Tensor input;                       // branch input after preparation
    std::vector<Tensor> post;           // per-block post-ReLU activations
    std::vector<BatchNormCache> bn;     // per-block normalization caches
    std::size_t last_len = 0;
};

struct ProjCache {
    Mat h_in;
    Mat hidden;  // post-ReLU hidden activations
};

struct ForwardOpts {
    bool train = true;
    bool update_running = false;
    // Per conv-block BN mode override (frozen blocks run in eval mode during
    // fine-tuning so their tensors stay bit-identical). Empty = all `train`.
    std::vector<bool> block_train;
};

// Prepare the branch view of a raw [B, C, T] batch: Time passes through,
// Freq substitutes the per-channel standardized two-sided magnitude spectrum,
// TimeFreq concatenates raw-first with that spectrum along channels.
Tensor branch_input(Branch b, const Tensor& x);

// All three branch views from a single FFT sweep.
struct BranchInputs {
    Tensor time, freq, tf;
    const Tensor& of(Branch b) const {
        return b == Branch::Time ? time : b == Branch::Freq ? freq : tf;
    }
};
BranchInputs prepare_branch_inputs(const Tensor& x);

// h [B, embed_dim]
Mat encode(ModelParams& m, Branch b, const Tensor& x_raw, const ForwardOpts& opts,
           BranchCache* cache);
// Same forward on an already-prepared branch view.
Mat encode_prepared(ModelParams& m, Branch b, const Tensor& prepared, const ForwardOpts& opts,
                    BranchCache* cache);
// Backward through the cached blocks; blocks below `stop_block` (0-based) are
// skipped entirely, which saves the gradient sweep under frozen layers.
void encode_backward(ModelParams& m, Branch b, const BranchCache& cache, const Mat& dh,
                     int stop_block = 0);

// z [B, proj_dim]
Mat project(const ModelParams& m, Branch b, const Mat& h, ProjCache* cache);
void project_backward(ModelParams& m, Branch b, const ProjCache& cache, const Mat& dz,
                      Mat* dh);

// logits [B, n_classes] from the time-frequency embedding
Mat classify(const ModelParams& m, const Mat& h_tf, Mat* cache_h = nullptr);
void classify_backward(ModelParams& m, const Mat& h_in, const Mat& dlogits, Mat* dh);

// Convenience: eval-mode tf-branch projection (the canonical embedding).
Mat tf_projection(ModelParams& m, const Tensor& x_raw);

// Reset every BatchNorm running statistic and refill it from batches of
// training data (single pass, cumulative average); used by SWA finalization.
void recompute_bn_stats(ModelParams& m, const std::vector<Branch>& branches,
                        const Tensor& data, std::size_t batch_size);

}  // namespace mclpd
