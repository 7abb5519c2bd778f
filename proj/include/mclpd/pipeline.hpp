#pragma once
// Orchestration of contrastive pre-training and cross-dataset fine-tuning:
// subject-level splits, batching, view generation, optimization loops, early
// stopping, SWA finalization, and metric computation.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mclpd/augment.hpp"
#include "mclpd/encoder.hpp"
#include "mclpd/optim.hpp"
#include "mclpd/sampler.hpp"
#include "mclpd/signal.hpp"

namespace mclpd {

struct PretrainConfig {
    std::size_t epochs = 30;
    std::size_t batch = 32;
    double lr = 1e-4;
    double tau = 0.1;
    std::size_t patience = 10;
    double min_delta = 1e-4;
    double t0 = 10.0;      // cosine warm-restart cycle length (epochs)
    double t_mult = 2.0;   // cycle multiplier
    double val_fraction = 0.1;  // subject-level validation share
    double weight_decay = 0.0;
};

struct FinetuneConfig {
    std::size_t epochs = 300;
    std::size_t batch = 32;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double smoothing = 0.1;
    double label_fraction = 0.05;  // share of the dataset's epochs used as labeled training
    double test_fraction = 0.9;    // share of subjects reserved as the test set
    double val_fraction = 0.5;     // validation share of the labeled budget (0 disables)
    int lookahead_k = 5;
    double lookahead_beta = 0.5;
    double layer_decay = 0.65;     // gamma of the layer-wise lr rule
    double swa_window = 0.25;      // SWA over the final fraction of epochs
    std::size_t swa_every = 5;
    std::size_t unfreeze_every = 0;  // epochs per stage; 0 -> ceil(epochs / units)
};

struct RunConfig {
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    SamplerConfig sampler;
    AugmentConfig augment;
    EncoderDims encoder;
    std::uint64_t seed = 0;
};

struct Metrics {
    double accuracy = 0.0;
    double f1 = 0.0;        // binary, PD (label 1) positive
    double precision = 0.0;
    double recall = 0.0;
};

struct EpochLog {
    std::string phase;
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_accuracy;
    double lr = 0.0;
    int stage = 0;  // fine-tuning unfreeze stage (0 for pre-training)
    std::vector<std::pair<std::string, double>> success_rates;
};

struct History {
    std::vector<EpochLog> epochs;
    SamplerState sampler;
    bool early_stopped = false;
};

// One JSON object per epoch, one line each.
std::string history_jsonl(const History& h);

// ---- subject-level splitting ------------------------------------------------

std::vector<int> unique_subjects(const EpochSet& data);

// Partition epochs so that ~fraction_b of subjects land in the second set.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_subject(
    const EpochSet& data, double fraction_b, Rng& rng);

// Throws if the two epoch-index sets share a subject.
void assert_subject_disjoint(const EpochSet& data, const std::vector<std::size_t>& a,
                             const std::vector<std::size_t>& b);

struct LabeledSplit {
    std::vector<std::size_t> train_idx, val_idx, test_idx;
};

// Class-stratified subject selection: test subjects are reserved first, then
// whole pool subjects fill the labeled budget (truncating within the last
// one); validation draws further pool subjects. Train/val/test subject sets
// are pairwise disjoint, and the train set always contains both classes.
LabeledSplit select_labeled(const EpochSet& data, const FinetuneConfig& cfg, Rng& rng);

// ---- augmentation over batches ------------------------------------------------

// Apply one plan to every epoch of a [B, C, T] batch; each epoch gets its own
// noise stream derived from (seed, epoch ordinal) so results do not depend on
// evaluation order.
Tensor apply_plan_batch(const std::vector<AugOp>& plan, const Tensor& x, std::uint64_t seed);

// ---- training entry points ------------------------------------------------------

struct PretrainResult {
    ModelParams model;
    History history;
};

PretrainResult pretrain(const EpochSet& unlabeled, const RunConfig& cfg);

struct FinetuneResult {
    ModelParams model;
    Metrics test_metrics;
    History history;
    std::vector<int> train_subjects, test_subjects;
};

FinetuneResult finetune(const ModelParams& pretrained, const EpochSet& labeled,
                        const RunConfig& cfg);

// Epoch-level evaluation on labeled data (rejects empty or unlabeled sets).
Metrics evaluate(ModelParams& model, const EpochSet& test);
std::vector<int> predict(ModelParams& model, const EpochSet& data, std::size_t batch = 64);
Metrics metrics_from_predictions(const std::vector<int>& preds,
                                 const std::vector<int>& labels);

}  // namespace mclpd
