#include "mclpd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mclpd {

SamplerState SamplerState::make(std::vector<AugOp> catalog, const SamplerConfig& cfg,
                                bool finetune) {
    if (catalog.empty()) throw std::invalid_argument("sampler: empty operator catalog");
    if (cfg.temperature <= 0.0)
        throw std::invalid_argument("sampler: temperature must be positive");
    SamplerState s;
    s.ops = std::move(catalog);
    s.n_success.assign(s.ops.size(), 0);
    s.n_total.assign(s.ops.size(), 0);
    s.temperature = cfg.temperature;
    s.threshold = finetune ? cfg.beta : cfg.alpha;
    s.combo_max = std::max<std::size_t>(1, cfg.combo_max);
    return s;
}

double success_score(const SamplerState& s, std::size_t i) {
    if (i >= s.ops.size()) throw std::out_of_range("success_score: bad operator index");
    if (s.n_total[i] == 0) return 0.5;  // neutral prior before first application
    return static_cast<double>(s.n_success[i]) / static_cast<double>(s.n_total[i]);
}

std::vector<double> success_scores(const SamplerState& s) {
    std::vector<double> out(s.ops.size());
    for (std::size_t i = 0; i < s.ops.size(); ++i) out[i] = success_score(s, i);
    return out;
}

std::vector<double> softmax_scores(const std::vector<double>& scores, double temperature) {
    if (temperature <= 0.0)
        throw std::invalid_argument("softmax_scores: temperature must be positive");
    if (scores.empty()) throw std::invalid_argument("softmax_scores: empty scores");
    double mx = scores[0];
    for (double v : scores) mx = std::max(mx, v);
    std::vector<double> p(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp((scores[i] - mx) / temperature);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

std::vector<double> probabilities(const SamplerState& s) {
    return softmax_scores(success_scores(s), s.temperature);
}

std::vector<AugOp> sample_plan(const SamplerState& s, Rng& rng) {
    const std::size_t k = s.ops.size();
    std::uniform_int_distribution<std::size_t> size_d(1, std::min(s.combo_max, k));
    const std::size_t n = size_d(rng);
    std::vector<double> p = probabilities(s);
    std::vector<std::size_t> alive(k);
    for (std::size_t i = 0; i < k; ++i) alive[i] = i;
    std::vector<AugOp> plan;
    plan.reserve(n);
    for (std::size_t draw = 0; draw < n; ++draw) {
        double sum = 0.0;
        for (std::size_t i : alive) sum += p[i];
        std::uniform_real_distribution<double> u(0.0, sum);
        double r = u(rng);
        std::size_t chosen = alive.back();
        for (std::size_t pos = 0; pos < alive.size(); ++pos) {
            r -= p[alive[pos]];
            if (r <= 0.0) {
                chosen = alive[pos];
                alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(pos));
                break;
            }
        }
        plan.push_back(s.ops[chosen]);
    }
    return plan;
}

bool judge_pretrain(const std::vector<double>& z, const std::vector<double>& z_aug,
                    double alpha) {
    if (z.size() != z_aug.size() || z.empty()) return false;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        dot += z[i] * z_aug[i];
        na += z[i] * z[i];
        nb += z_aug[i] * z_aug[i];
    }
    if (na <= 0.0 || nb <= 0.0) return false;  // cosine undefined -> failure
    return dot / std::sqrt(na * nb) > alpha;
}

bool judge_finetune(const std::vector<int>& preds, const std::vector<int>& targets,
                    double beta) {
    if (preds.empty() || preds.size() != targets.size()) return false;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == targets[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size()) > beta;
}

void record(SamplerState& s, const std::vector<AugOp>& plan, bool success) {
    for (const AugOp& op : plan) {
        const auto idx = static_cast<std::size_t>(op.kind);
        bool found = false;
        for (std::size_t i = 0; i < s.ops.size(); ++i) {
            if (s.ops[i].kind == op.kind) {
                s.n_total[i] += 1;
                if (success) s.n_success[i] += 1;
                found = true;
                break;
            }
        }
        if (!found)
            throw std::invalid_argument(std::string("record: operator not in state: ") +
                                        aug_kind_name(static_cast<AugKind>(idx)));
    }
    s.history.push_back({s.current_epoch, success_scores(s)});
}

std::string history_csv(const SamplerState& s) {
    // Collapse to the last snapshot of each epoch.
    std::map<std::size_t, const SamplerHistoryRow*> last;
    for (const auto& row : s.history) last[row.epoch] = &row;
    std::ostringstream os;
    os << "epoch,operator,success_rate\n";
    for (const auto& [epoch, row] : last)
        for (std::size_t i = 0; i < s.ops.size(); ++i)
            os << epoch << ',' << aug_kind_name(s.ops[i].kind) << ','
               << row->success_rates[i] << '\n';
    return os.str();
}

}  // namespace mclpd
