#include "mclpd/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mclpd {

double layer_lr(double eta0, double gamma, int total_layers, int layer) {
    if (layer < 1 || layer > total_layers)
        throw std::out_of_range("layer_lr: layer outside 1..L");
    if (gamma <= 0.0 || gamma > 1.0)
        throw std::invalid_argument("layer_lr: gamma must be in (0,1]");
    return eta0 * std::pow(gamma, static_cast<double>(total_layers - layer));
}

std::vector<int> unfrozen_set(int total_layers, int stage) {
    if (stage < 1 || stage > total_layers)
        throw std::out_of_range("unfrozen_set: stage outside 1..L");
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(stage));
    for (int i = 0; i < stage; ++i) out.push_back(total_layers - i);
    return out;
}

double cosine_warm_restarts(double step, double t0, double mult, double eta_max,
                            double eta_min) {
    if (t0 < 1.0) throw std::invalid_argument("cosine_warm_restarts: T0 must be >= 1");
    if (mult < 1.0) throw std::invalid_argument("cosine_warm_restarts: mult must be >= 1");
    if (step < 0.0) step = 0.0;
    double cycle_len = t0;
    double cycle_start = 0.0;
    while (step >= cycle_start + cycle_len) {
        cycle_start += cycle_len;
        cycle_len *= mult;
    }
    const double t_cur = step - cycle_start;
    return eta_min + (eta_max - eta_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * t_cur / cycle_len));
}

void adamw_step(Tensor& value, const Tensor& grad, MomentPair& moments, double lr,
                double weight_decay, const AdamConfig& cfg) {
    if (!value.same_shape(grad)) throw std::invalid_argument("adamw: shape mismatch");
    if (!all_finite(grad)) throw std::runtime_error("adamw: non-finite gradient");
    if (moments.m.size() != value.size()) {
        moments.m = Tensor(value.shape);
        moments.v = Tensor(value.shape);
        moments.t = 0;
    }
    moments.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(moments.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(moments.t));
    for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = grad.v[i];
        moments.m.v[i] = cfg.beta1 * moments.m.v[i] + (1.0 - cfg.beta1) * g;
        moments.v.v[i] = cfg.beta2 * moments.v.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = moments.m.v[i] / bc1;
        const double vhat = moments.v.v[i] / bc2;
        value.v[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        value.v[i] -= lr * weight_decay * value.v[i];
    }
}

void lookahead_step(TrainState& st, ParamSet& set,
                    const std::vector<std::pair<std::string, double>>& param_lrs,
                    double weight_decay, const AdamConfig& cfg) {
    // Validate up front so a rejected step leaves every tensor untouched.
    for (const auto& [name, lr] : param_lrs) {
        const Param& p = set.get(name);
        if (!all_finite(p.grad))
            throw std::runtime_error("lookahead_step: non-finite gradient in " + name);
        (void)lr;
    }
    for (const auto& [name, lr] : param_lrs) {
        Param& p = set.get(name);
        if (st.inner_k > 0 && !st.slow.count(name)) st.slow.emplace(name, p.value);
        adamw_step(p.value, p.grad, st.moments[name], lr, weight_decay, cfg);
    }
    st.step += 1;
    if (st.inner_k > 0 && st.step % st.inner_k == 0) {
        for (const auto& [name, lr] : param_lrs) {
            (void)lr;
            Param& p = set.get(name);
            Tensor& phi = st.slow.at(name);
            for (std::size_t i = 0; i < phi.size(); ++i) {
                phi.v[i] += st.slow_rate * (p.value.v[i] - phi.v[i]);
                p.value.v[i] = phi.v[i];
            }
        }
    }
}

void reset_slow(TrainState& st, const std::string& name) { st.slow.erase(name); }

void swa_update(TrainState& st, const ParamSet& set) {
    for (const auto& p : set.items) {
        auto it = st.swa.sum.find(p.name);
        if (it == st.swa.sum.end()) {
            if (st.swa.count != 0)
                throw std::invalid_argument("swa_update: checkpoint shape set changed");
            st.swa.sum.emplace(p.name, p.value);
        } else {
            if (!it->second.same_shape(p.value))
                throw std::invalid_argument("swa_update: tensor shape mismatch: " + p.name);
            for (std::size_t i = 0; i < p.value.size(); ++i) it->second.v[i] += p.value.v[i];
        }
    }
    st.swa.count += 1;
}

void swa_finalize(const TrainState& st, ParamSet& set) {
    if (st.swa.count == 0)
        throw std::logic_error("swa_finalize: no checkpoints registered");
    const double inv = 1.0 / static_cast<double>(st.swa.count);
    for (auto& p : set.items) {
        auto it = st.swa.sum.find(p.name);
        if (it == st.swa.sum.end()) continue;
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value.v[i] = it->second.v[i] * inv;
    }
}

}  // namespace mclpd
