#pragma once
// Training mathematics: decoupled-weight-decay Adam, cosine annealing with
// warm restarts, the two-timescale Lookahead wrapper, stochastic weight
// averaging, and layer-wise learning rates with progressive unfreezing.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mclpd/encoder.hpp"
#include "mclpd/tensor.hpp"

namespace mclpd {

// eta0 * gamma^(L - l) for layer l in 1..L.
double layer_lr(double eta0, double gamma, int total_layers, int layer);

// Unfrozen layer units at stage i: {L, L-1, ..., L-(i-1)}.
std::vector<int> unfrozen_set(int total_layers, int stage);

// Cosine decay from eta_max to eta_min inside cycles of length T0, T0*mult,
// T0*mult^2, ... `step` may be fractional (units: epochs).
double cosine_warm_restarts(double step, double t0, double mult, double eta_max,
                            double eta_min);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct MomentPair {
    Tensor m, v;
    std::int64_t t = 0;  // per-tensor update count for bias correction
};

// Single-tensor AdamW update; weight decay is applied to the weights
// directly, not folded into the gradient.
void adamw_step(Tensor& value, const Tensor& grad, MomentPair& moments, double lr,
                double weight_decay, const AdamConfig& cfg = {});

struct SwaAccumulator {
    std::map<std::string, Tensor> sum;
    std::int64_t count = 0;
};

struct TrainState {
    std::map<std::string, MomentPair> moments;
    std::map<std::string, Tensor> slow;  // Lookahead slow weights, keyed like params
    SwaAccumulator swa;
    std::int64_t step = 0;   // inner steps taken
    int inner_k = 5;         // Lookahead sync period; 0 disables the wrapper
    double slow_rate = 0.5;  // Lookahead beta
    int stage = 1;           // current unfreeze stage
    double schedule_pos = 0.0;
};

// One inner AdamW step over the listed (name, lr) pairs, then a Lookahead
// sync every inner_k steps (slow += beta * (fast - slow); fast reset to
// slow). Frozen parameters are simply not listed and stay bit-identical.
// Non-finite gradients reject the step with no state change.
void lookahead_step(TrainState& st, ParamSet& set,
                    const std::vector<std::pair<std::string, double>>& param_lrs,
                    double weight_decay, const AdamConfig& cfg = {});

// Drop a parameter's Lookahead slow copy so it re-seeds from the current fast
// weights (used when a layer is newly unfrozen).
void reset_slow(TrainState& st, const std::string& name);

// Register a full parameter snapshot in the running SWA average.
void swa_update(TrainState& st, const ParamSet& set);
// Overwrite `set` values with the accumulated average; rejects empty state.
void swa_finalize(const TrainState& st, ParamSet& set);

}  // namespace mclpd
