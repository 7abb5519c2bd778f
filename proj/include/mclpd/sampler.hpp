#pragma once
// Dynamic augmentation manager: per-operator success counters, temperature
// softmax sampling of operator combos, and the stage-specific success judges.
// Mutation (record) must be serialized by the caller; reads are const.

#include <cstdint>
#include <string>
#include <vector>

#include "mclpd/augment.hpp"
#include "mclpd/rng.hpp"

namespace mclpd {

struct SamplerConfig {
    double temperature = 1.0;
    double temperature_decay = 1.0;  // multiplicative per-epoch decay; 1 = fixed
    double alpha = 0.5;              // pre-training success threshold
    double beta = 0.5;               // fine-tuning success threshold
    std::size_t combo_max = 3;       // combo size drawn uniformly from {1..combo_max}
};

struct SamplerHistoryRow {
    std::size_t epoch = 0;
    std::vector<double> success_rates;  // one per operator, in catalog order
};

struct SamplerState {
    std::vector<AugOp> ops;
    std::vector<std::int64_t> n_success;
    std::vector<std::int64_t> n_total;
    double temperature = 1.0;
    double threshold = 0.5;  // alpha during pre-training, beta during fine-tuning
    std::size_t combo_max = 3;
    std::size_t current_epoch = 0;
    std::vector<SamplerHistoryRow> history;

    static SamplerState make(std::vector<AugOp> catalog, const SamplerConfig& cfg,
                             bool finetune);
    std::size_t num_ops() const { return ops.size(); }
};

// n_success[i] / n_total[i]; 0.5 neutral prior for an unseen operator.
double success_score(const SamplerState& s, std::size_t i);
std::vector<double> success_scores(const SamplerState& s);

// Softmax with max subtraction; the kernel behind probabilities().
std::vector<double> softmax_scores(const std::vector<double>& scores, double temperature);

// Softmax of success scores at the state temperature.
std::vector<double> probabilities(const SamplerState& s);

// Draw a combo: size uniform in {1..combo_max}, then that many distinct
// operators by probability without replacement.
std::vector<AugOp> sample_plan(const SamplerState& s, Rng& rng);

// Pre-training judge: cosine(z, z_aug) > alpha; zero-norm embeddings fail.
bool judge_pretrain(const std::vector<double>& z, const std::vector<double>& z_aug,
                    double alpha);

// Fine-tuning judge: mean(preds == targets) > beta; empty batches fail.
bool judge_finetune(const std::vector<int>& preds, const std::vector<int>& targets,
                    double beta);

// Credit the whole combo with one outcome and snapshot the success rates.
void record(SamplerState& s, const std::vector<AugOp>& plan, bool success);

// CSV "epoch,operator,success_rate" with one row per operator per epoch
// (last snapshot of each epoch).
std::string history_csv(const SamplerState& s);

}  // namespace mclpd
