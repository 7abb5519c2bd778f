#include "mclpd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mclpd/objective.hpp"

namespace mclpd {

using nlohmann::json;

std::string history_jsonl(const History& h) {
    std::ostringstream os;
    for (const auto& e : h.epochs) {
        json j;
        j["phase"] = e.phase;
        j["epoch"] = e.epoch;
        j["train_loss"] = e.train_loss;
        if (e.val_loss)
            j["val_loss"] = *e.val_loss;
        else
            j["val_loss"] = nullptr;
        if (e.val_accuracy)
            j["val_accuracy"] = *e.val_accuracy;
        else
            j["val_accuracy"] = nullptr;
        j["lr"] = e.lr;
        if (e.stage > 0) j["stage"] = e.stage;
        json rates = json::object();
        for (const auto& [name, rate] : e.success_rates) rates[name] = rate;
        j["success_rates"] = rates;
        os << j.dump() << '\n';
    }
    return os.str();
}

// ---- splits -------------------------------------------------------------------

std::vector<int> unique_subjects(const EpochSet& data) {
    std::set<int> s(data.subject_ids.begin(), data.subject_ids.end());
    return {s.begin(), s.end()};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_subject(
    const EpochSet& data, double fraction_b, Rng& rng) {
    if (fraction_b < 0.0 || fraction_b > 1.0)
        throw std::invalid_argument("split_by_subject: fraction outside [0,1]");
    std::vector<int> subjects = unique_subjects(data);
    std::shuffle(subjects.begin(), subjects.end(), rng);
    std::size_t n_b = static_cast<std::size_t>(
        std::lround(fraction_b * static_cast<double>(subjects.size())));
    if (fraction_b > 0.0 && n_b == 0) n_b = 1;
    if (n_b >= subjects.size() && fraction_b < 1.0) n_b = subjects.size() - 1;
    std::set<int> side_b(subjects.begin(), subjects.begin() + static_cast<long>(n_b));
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
    for (std::size_t e = 0; e < data.n_epochs(); ++e) {
        if (side_b.count(data.subject_ids[e]))
            out.second.push_back(e);
        else
            out.first.push_back(e);
    }
    return out;
}

void assert_subject_disjoint(const EpochSet& data, const std::vector<std::size_t>& a,
                             const std::vector<std::size_t>& b) {
    std::set<int> sa, sb;
    for (auto e : a) sa.insert(data.subject_ids[e]);
    for (auto e : b) sb.insert(data.subject_ids[e]);
    for (int s : sa)
        if (sb.count(s))
            throw std::logic_error("subject " + std::to_string(s) +
                                   " appears on both sides of a split");
}

LabeledSplit select_labeled(const EpochSet& data, const FinetuneConfig& cfg, Rng& rng) {
    if (!data.labels) throw std::invalid_argument("select_labeled: labels required");
    if (cfg.label_fraction <= 0.0 || cfg.label_fraction > 1.0)
        throw std::invalid_argument("select_labeled: label_fraction outside (0,1]");

    // subjects per class, with epoch indices in dataset order
    std::map<int, std::vector<std::size_t>> epochs_of;
    std::map<int, int> class_of;
    for (std::size_t e = 0; e < data.n_epochs(); ++e) {
        epochs_of[data.subject_ids[e]].push_back(e);
        class_of[data.subject_ids[e]] = (*data.labels)[e];
    }
    std::vector<int> subj0, subj1;
    for (const auto& [s, cls] : class_of) (cls == 0 ? subj0 : subj1).push_back(s);
    if (subj0.empty() || subj1.empty())
        throw std::invalid_argument("select_labeled: need subjects of both classes");
    std::shuffle(subj0.begin(), subj0.end(), rng);
    std::shuffle(subj1.begin(), subj1.end(), rng);

    const std::size_t budget = std::max<std::size_t>(
        2, static_cast<std::size_t>(
               std::lround(cfg.label_fraction * static_cast<double>(data.n_epochs()))));

    LabeledSplit split;
    auto take_class = [&](std::vector<int>& subjects, std::size_t train_budget) {
        // reserve test subjects first
        std::size_t n_test = static_cast<std::size_t>(
            std::lround(cfg.test_fraction * static_cast<double>(subjects.size())));
        if (n_test >= subjects.size()) n_test = subjects.size() - 1;
        std::size_t pos = 0;
        for (; pos < n_test; ++pos)
            for (auto e : epochs_of[subjects[pos]]) split.test_idx.push_back(e);
        // labeled training epochs from whole pool subjects, truncating the last
        std::size_t remaining = train_budget;
        while (remaining > 0 && pos < subjects.size()) {
            const auto& eps = epochs_of[subjects[pos]];
            const std::size_t take = std::min(remaining, eps.size());
            split.train_idx.insert(split.train_idx.end(), eps.begin(),
                                   eps.begin() + static_cast<long>(take));
            remaining -= take;
            ++pos;
        }
        // validation epochs from further pool subjects
        if (cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0) {
            std::size_t val_budget = static_cast<std::size_t>(
                std::lround(static_cast<double>(train_budget) * cfg.val_fraction /
                            (1.0 - cfg.val_fraction)));
            while (val_budget > 0 && pos < subjects.size()) {
                const auto& eps = epochs_of[subjects[pos]];
                const std::size_t take = std::min(val_budget, eps.size());
                split.val_idx.insert(split.val_idx.end(), eps.begin(),
                                     eps.begin() + static_cast<long>(take));
                val_budget -= take;
                ++pos;
            }
        }
    };
    take_class(subj0, budget / 2);
    take_class(subj1, budget - budget / 2);

    std::sort(split.test_idx.begin(), split.test_idx.end());
    assert_subject_disjoint(data, split.train_idx, split.test_idx);
    assert_subject_disjoint(data, split.train_idx, split.val_idx);
    assert_subject_disjoint(data, split.val_idx, split.test_idx);

    // both classes must be present among the labeled training epochs
    bool has0 = false, has1 = false;
    for (auto e : split.train_idx) ((*data.labels)[e] == 0 ? has0 : has1) = true;
    if (!has0 || !has1)
        throw std::runtime_error("select_labeled: single-class labeled split");
    return split;
}

// ---- batching helpers ------------------------------------------------------------

namespace {

Tensor gather_batch(const EpochSet& data, const std::vector<std::size_t>& idx,
                    std::size_t start, std::size_t count) {
    const std::size_t c = data.n_channels(), t = data.n_samples();
    Tensor x({count, c, t});
    for (std::size_t i = 0; i < count; ++i)
        std::copy(&data.data.v[idx[start + i] * c * t], &data.data.v[(idx[start + i] + 1) * c * t],
                  &x.v[i * c * t]);
    return x;
}

std::vector<int> gather_labels(const EpochSet& data, const std::vector<std::size_t>& idx,
                               std::size_t start, std::size_t count) {
    std::vector<int> y(count);
    for (std::size_t i = 0; i < count; ++i) y[i] = (*data.labels)[idx[start + i]];
    return y;
}

double batch_mean_cosine(const Mat& a, const Mat& b) {
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t r = 0; r < a.rows; ++r) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t c = 0; c < a.cols; ++c) {
            dot += a.at(r, c) * b.at(r, c);
            na += a.at(r, c) * a.at(r, c);
            nb += b.at(r, c) * b.at(r, c);
        }
        if (na > 0.0 && nb > 0.0) {
            acc += dot / std::sqrt(na * nb);
            ++used;
        }
    }
    return used > 0 ? acc / static_cast<double>(used) : -1.0;
}

std::vector<std::pair<std::string, double>> snapshot_rates(const SamplerState& s) {
    std::vector<std::pair<std::string, double>> out;
    const auto rates = success_scores(s);
    for (std::size_t i = 0; i < s.ops.size(); ++i)
        out.emplace_back(aug_kind_name(s.ops[i].kind), rates[i]);
    return out;
}

constexpr std::uint64_t kAugBatchTag = 0xA06;

}  // namespace

Tensor apply_plan_batch(const std::vector<AugOp>& plan, const Tensor& x, std::uint64_t seed) {
    const std::size_t b = x.dim(0), c = x.dim(1), t = x.dim(2);
    Tensor out({b, c, t});
    // per-epoch noise streams keyed by position, so parallel application is
    // identical to sequential
    parallel_for(b, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s) {
            Mat epoch(c, t);
            std::copy(&x.v[s * c * t], &x.v[(s + 1) * c * t], epoch.v.begin());
            AugOutcome o = compose(plan, epoch, stream_id(seed, kAugBatchTag, s));
            std::copy(o.output.v.begin(), o.output.v.end(), &out.v[s * c * t]);
        }
    });
    return out;
}

// ---- contrastive pre-training -------------------------------------------------------

namespace {

struct ViewProjections {
    // [branch][view] projections and per-branch gradient buffers
    Mat z[3][2];
    Mat dz[3][2];
};

constexpr Branch kBranches[3] = {Branch::Time, Branch::Freq, Branch::TimeFreq};

// Forward both views through all branches, compute the per-branch two-view
// NT-Xent average, and leave dL/dz in vp. Returns the loss.
double contrastive_forward(ModelParams& model, const BranchInputs& v1, const BranchInputs& v2,
                           double tau, bool update_running, ViewProjections& vp) {
    for (int bi = 0; bi < 3; ++bi) {
        ForwardOpts opts;
        opts.train = true;
        opts.update_running = update_running;
        Mat h1 = encode_prepared(model, kBranches[bi], v1.of(kBranches[bi]), opts, nullptr);
        Mat h2 = encode_prepared(model, kBranches[bi], v2.of(kBranches[bi]), opts, nullptr);
        vp.z[bi][0] = project(model, kBranches[bi], h1, nullptr);
        vp.z[bi][1] = project(model, kBranches[bi], h2, nullptr);
    }
    double loss = 0.0;
    for (int bi = 0; bi < 3; ++bi) {
        ViewSet vs;
        vs.tau = tau;
        vs.projections = {vp.z[bi][0], vp.z[bi][1]};
        std::vector<Mat> grads;
        loss += contrastive_loss(vs, &grads);
        // average across the three branches
        for (int view = 0; view < 2; ++view) {
            vp.dz[bi][view] = grads[static_cast<std::size_t>(view)];
            for (auto& g : vp.dz[bi][view].v) g /= 3.0;
        }
    }
    return loss / 3.0;
}

// Recompute each branch-view forward with caches and push the stored dz back.
void contrastive_backward(ModelParams& model, const BranchInputs& v1, const BranchInputs& v2,
                          ViewProjections& vp) {
    for (int bi = 0; bi < 3; ++bi) {
        for (int view = 0; view < 2; ++view) {
            const BranchInputs& x = view == 0 ? v1 : v2;
            BranchCache cache;
            ForwardOpts opts;
            opts.train = true;
            opts.update_running = false;
            Mat h = encode_prepared(model, kBranches[bi], x.of(kBranches[bi]), opts, &cache);
            ProjCache pc;
            project(model, kBranches[bi], h, &pc);
            Mat dh;
            project_backward(model, kBranches[bi], pc, vp.dz[bi][view], &dh);
            encode_backward(model, kBranches[bi], cache, dh);
        }
    }
}

double validation_contrastive_loss(ModelParams& model, const EpochSet& data,
                                   const std::vector<std::size_t>& val_idx,
                                   const SamplerState& sampler, const RunConfig& cfg,
                                   std::size_t epoch) {
    if (val_idx.empty()) return std::numeric_limits<double>::quiet_NaN();
    Rng vrng = make_rng(cfg.seed, stream::kVal, epoch);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 2 <= val_idx.size(); start += cfg.pretrain.batch) {
        const std::size_t bs = std::min(cfg.pretrain.batch, val_idx.size() - start);
        if (bs < 2) break;
        Tensor x = gather_batch(data, val_idx, start, bs);
        auto plan1 = sample_plan(sampler, vrng);
        auto plan2 = sample_plan(sampler, vrng);
        BranchInputs v1 = prepare_branch_inputs(
            apply_plan_batch(plan1, x, stream_id(cfg.seed, stream::kVal, epoch, start)));
        BranchInputs v2 = prepare_branch_inputs(
            apply_plan_batch(plan2, x, stream_id(cfg.seed, stream::kVal, epoch, start + 1)));
        double loss = 0.0;
        for (int bi = 0; bi < 3; ++bi) {
            ForwardOpts opts;
            opts.train = false;
            Mat h1 = encode_prepared(model, kBranches[bi], v1.of(kBranches[bi]), opts, nullptr);
            Mat h2 = encode_prepared(model, kBranches[bi], v2.of(kBranches[bi]), opts, nullptr);
            ViewSet vs;
            vs.tau = cfg.pretrain.tau;
            vs.projections = {project(model, kBranches[bi], h1, nullptr),
                              project(model, kBranches[bi], h2, nullptr)};
            loss += contrastive_loss(vs, nullptr);
        }
        total += loss / 3.0;
        ++batches;
    }
    return batches > 0 ? total / static_cast<double>(batches)
                       : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

PretrainResult pretrain(const EpochSet& unlabeled, const RunConfig& cfg) {
    unlabeled.validate();
    if (unlabeled.n_epochs() < 4) throw std::invalid_argument("pretrain: dataset too small");
    EpochSet data = zscore(unlabeled);

    EncoderDims dims = cfg.encoder;
    dims.in_channels = data.n_channels();
    ModelParams model = init_model(dims, cfg.seed);

    Rng split_rng = make_rng(cfg.seed, stream::kSplit);
    auto [train_idx, val_idx] = split_by_subject(data, cfg.pretrain.val_fraction, split_rng);
    if (!val_idx.empty()) assert_subject_disjoint(data, train_idx, val_idx);
    if (train_idx.size() < 2) throw std::invalid_argument("pretrain: not enough training epochs");

    SamplerConfig scfg = cfg.sampler;
    AugmentConfig acfg = cfg.augment;
    acfg.fs = data.fs;
    SamplerState sampler = SamplerState::make(default_ops(acfg), scfg, /*finetune=*/false);
    Rng sampler_rng = make_rng(cfg.seed, stream::kSampler);

    TrainState st;
    st.inner_k = 0;  // plain AdamW during pre-training

    std::vector<std::pair<std::string, double>> param_lrs;
    for (const auto& p : model.set.items)
        if (p.trainable && p.name.rfind("cls.", 0) != 0) param_lrs.emplace_back(p.name, 0.0);

    History hist;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_improve = 0;

    std::uint64_t global_step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.pretrain.epochs; ++epoch) {
        sampler.current_epoch = epoch;
        std::vector<std::size_t> order = train_idx;
        Rng shuffle_rng = make_rng(cfg.seed, stream::kShuffle, epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        const std::size_t n_batches = order.size() / cfg.pretrain.batch +
                                      (order.size() % cfg.pretrain.batch >= 2 ? 1 : 0);
        double epoch_loss = 0.0;
        std::size_t done_batches = 0;
        double lr = cfg.pretrain.lr;
        for (std::size_t start = 0; start + 2 <= order.size(); start += cfg.pretrain.batch) {
            const std::size_t bs = std::min(cfg.pretrain.batch, order.size() - start);
            if (bs < 2) break;
            Tensor x = gather_batch(data, order, start, bs);
            auto plan1 = sample_plan(sampler, sampler_rng);
            auto plan2 = sample_plan(sampler, sampler_rng);
            BranchInputs v1 = prepare_branch_inputs(
                apply_plan_batch(plan1, x, stream_id(cfg.seed, 2 * global_step)));
            BranchInputs v2 = prepare_branch_inputs(
                apply_plan_batch(plan2, x, stream_id(cfg.seed, 2 * global_step + 1)));

            ViewProjections vp;
            const double loss =
                contrastive_forward(model, v1, v2, cfg.pretrain.tau, true, vp);
            if (!std::isfinite(loss))
                throw std::runtime_error("pretrain: non-finite contrastive loss at epoch " +
                                         std::to_string(epoch));
            epoch_loss += loss;

            // judge both plans against the un-augmented embedding (Eq. 3 on
            // the tf projection, batch-mean cosine)
            Mat z0 = tf_projection(model, x);
            record(sampler, plan1,
                   batch_mean_cosine(z0, vp.z[2][0]) > sampler.threshold);
            record(sampler, plan2,
                   batch_mean_cosine(z0, vp.z[2][1]) > sampler.threshold);

            model.set.zero_grads();
            contrastive_backward(model, v1, v2, vp);

            const double pos = static_cast<double>(epoch - 1) +
                               static_cast<double>(done_batches) /
                                   std::max<std::size_t>(1, n_batches);
            lr = cosine_warm_restarts(pos, cfg.pretrain.t0, cfg.pretrain.t_mult,
                                      cfg.pretrain.lr, 0.0);
            for (auto& [name, plr] : param_lrs) plr = lr;
            lookahead_step(st, model.set, param_lrs, cfg.pretrain.weight_decay);
            ++global_step;
            ++done_batches;
        }
        epoch_loss /= std::max<std::size_t>(1, done_batches);

        const double val_loss =
            validation_contrastive_loss(model, data, val_idx, sampler, cfg, epoch);

        EpochLog log;
        log.phase = "pretrain";
        log.epoch = epoch;
        log.train_loss = epoch_loss;
        if (std::isfinite(val_loss)) log.val_loss = val_loss;
        log.lr = lr;
        log.success_rates = snapshot_rates(sampler);
        hist.epochs.push_back(log);

        if (std::isfinite(val_loss)) {
            if (best_val - val_loss > cfg.pretrain.min_delta) {
                best_val = val_loss;
                since_improve = 0;
            } else if (++since_improve >= cfg.pretrain.patience) {
                hist.early_stopped = true;
                break;
            }
        }
    }
    hist.sampler = sampler;
    return {std::move(model), std::move(hist)};
}

// ---- fine-tuning -----------------------------------------------------------------

namespace {

// Layer units for progressive unfreezing: tf conv blocks 1..3 plus the
// classification head as unit 4.
constexpr int kFinetuneUnits = 4;

int unit_of(const Param& p) {
    if (p.name.rfind("tf.conv", 0) == 0 || p.name.rfind("tf.bn", 0) == 0) return p.depth;
    if (p.name.rfind("cls.", 0) == 0) return kFinetuneUnits;
    return 0;  // not part of the fine-tuning graph
}

}  // namespace

FinetuneResult finetune(const ModelParams& pretrained, const EpochSet& labeled,
                        const RunConfig& cfg) {
    labeled.validate();
    if (!labeled.labels) throw std::invalid_argument("finetune: labels required");
    EpochSet data = zscore(labeled);

    ModelParams model = clone_values(pretrained);
    if (model.dims.in_channels != data.n_channels())
        throw std::invalid_argument("finetune: channel count mismatch with pretrained model");

    Rng split_rng = make_rng(cfg.seed, stream::kSplit, 0xF1);
    LabeledSplit split = select_labeled(data, cfg.finetune, split_rng);

    SamplerConfig scfg = cfg.sampler;
    AugmentConfig acfg = cfg.augment;
    acfg.fs = data.fs;
    SamplerState sampler = SamplerState::make(default_ops(acfg), scfg, /*finetune=*/true);
    Rng sampler_rng = make_rng(cfg.seed, stream::kSampler, 0xF1);

    TrainState st;
    st.inner_k = cfg.finetune.lookahead_k;
    st.slow_rate = cfg.finetune.lookahead_beta;

    const std::size_t unfreeze_every =
        cfg.finetune.unfreeze_every > 0
            ? cfg.finetune.unfreeze_every
            : (cfg.finetune.epochs + kFinetuneUnits - 1) / kFinetuneUnits;
    const std::size_t swa_span = static_cast<std::size_t>(
        std::ceil(cfg.finetune.swa_window * static_cast<double>(cfg.finetune.epochs)));
    const std::size_t swa_start = cfg.finetune.epochs > swa_span
                                      ? cfg.finetune.epochs - swa_span + 1
                                      : 1;

    History hist;
    int prev_stage = 0;
    std::uint64_t global_step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.finetune.epochs; ++epoch) {
        sampler.current_epoch = epoch;
        const int stage = std::min<int>(
            kFinetuneUnits, 1 + static_cast<int>((epoch - 1) / unfreeze_every));
        const auto units = unfrozen_set(kFinetuneUnits, stage);
        std::set<int> unfrozen(units.begin(), units.end());
        // param -> lr table for this stage
        std::vector<std::pair<std::string, double>> param_lrs;
        for (const auto& p : model.set.items) {
            const int u = unit_of(p);
            if (u == 0 || !p.trainable || !unfrozen.count(u)) continue;
            param_lrs.emplace_back(
                p.name, layer_lr(cfg.finetune.lr, cfg.finetune.layer_decay, kFinetuneUnits, u));
        }
        if (stage != prev_stage) {
            // newly unfrozen layers re-seed their Lookahead slow weights
            for (const auto& [name, lr] : param_lrs) {
                (void)lr;
                reset_slow(st, name);
                st.slow.emplace(name, model.set.get(name).value);
            }
            prev_stage = stage;
        }
        // conv blocks outside the unfrozen set run their BN in eval mode so
        // the whole layer stays bit-identical
        ForwardOpts train_opts;
        train_opts.train = true;
        train_opts.update_running = true;
        train_opts.block_train.assign(3, false);
        for (int blk = 1; blk <= 3; ++blk)
            train_opts.block_train[static_cast<std::size_t>(blk - 1)] =
                unfrozen.count(blk) > 0;

        std::vector<std::size_t> order = split.train_idx;
        Rng shuffle_rng = make_rng(cfg.seed, stream::kShuffle, 0xF1, epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        std::size_t done = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.finetune.batch) {
            const std::size_t bs = std::min(cfg.finetune.batch, order.size() - start);
            Tensor x = gather_batch(data, order, start, bs);
            std::vector<int> y = gather_labels(data, order, start, bs);
            auto plan = sample_plan(sampler, sampler_rng);
            Tensor xa = apply_plan_batch(plan, x, stream_id(cfg.seed, 0xF1, global_step));

            BranchCache cache;
            Mat h = encode(model, Branch::TimeFreq, xa, train_opts, &cache);
            Mat h_saved;
            Mat logits = classify(model, h, &h_saved);
            Mat dlogits;
            const double loss = smoothed_ce(logits, y, cfg.finetune.smoothing, &dlogits);
            if (!std::isfinite(loss))
                throw std::runtime_error("finetune: non-finite loss at epoch " +
                                         std::to_string(epoch));
            epoch_loss += loss;

            std::vector<int> preds(bs);
            for (std::size_t r = 0; r < bs; ++r)
                preds[r] = logits.at(r, 1) > logits.at(r, 0) ? 1 : 0;
            record(sampler, plan, judge_finetune(preds, y, sampler.threshold));

            model.set.zero_grads();
            Mat dh;
            classify_backward(model, h_saved, dlogits, &dh);
            // no gradient sweep below the lowest unfrozen conv block
            int lowest_conv = 4;
            for (int u : units)
                if (u <= 3) lowest_conv = std::min(lowest_conv, u);
            if (lowest_conv <= 3)
                encode_backward(model, Branch::TimeFreq, cache, dh, lowest_conv - 1);
            lookahead_step(st, model.set, param_lrs, cfg.finetune.weight_decay);
            ++global_step;
            ++done;
        }
        epoch_loss /= std::max<std::size_t>(1, done);

        EpochLog log;
        log.phase = "finetune";
        log.epoch = epoch;
        log.train_loss = epoch_loss;
        log.lr = cfg.finetune.lr;
        log.stage = stage;
        log.success_rates = snapshot_rates(sampler);
        if (!split.val_idx.empty()) {
            EpochSet val = subset(data, split.val_idx);
            Metrics m = evaluate(model, val);
            log.val_accuracy = m.accuracy;
        }
        hist.epochs.push_back(log);

        if (epoch >= swa_start &&
            ((epoch - swa_start) % cfg.finetune.swa_every == 0 || epoch == cfg.finetune.epochs))
            swa_update(st, model.set);
    }

    swa_finalize(st, model.set);
    {
        Tensor train_data({split.train_idx.size(), data.n_channels(), data.n_samples()});
        for (std::size_t i = 0; i < split.train_idx.size(); ++i)
            std::copy(&data.data.v[split.train_idx[i] * data.n_channels() * data.n_samples()],
                      &data.data.v[(split.train_idx[i] + 1) * data.n_channels() * data.n_samples()],
                      &train_data.v[i * data.n_channels() * data.n_samples()]);
        recompute_bn_stats(model, {Branch::TimeFreq}, train_data, cfg.finetune.batch);
    }

    FinetuneResult res;
    res.history = std::move(hist);
    res.history.sampler = sampler;
    {
        std::set<int> tr, te;
        for (auto e : split.train_idx) tr.insert(data.subject_ids[e]);
        for (auto e : split.test_idx) te.insert(data.subject_ids[e]);
        res.train_subjects.assign(tr.begin(), tr.end());
        res.test_subjects.assign(te.begin(), te.end());
    }
    EpochSet test = subset(data, split.test_idx);
    res.test_metrics = evaluate(model, test);
    res.model = std::move(model);
    return res;
}

// ---- evaluation ---------------------------------------------------------------------

std::vector<int> predict(ModelParams& model, const EpochSet& data, std::size_t batch) {
    const std::size_t n = data.n_epochs();
    std::vector<int> preds(n);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    ForwardOpts opts;
    opts.train = false;
    for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t bs = std::min(batch, n - start);
        Tensor x = gather_batch(data, idx, start, bs);
        Mat h = encode(model, Branch::TimeFreq, x, opts, nullptr);
        Mat logits = classify(model, h, nullptr);
        for (std::size_t r = 0; r < bs; ++r)
            preds[start + r] = logits.at(r, 1) > logits.at(r, 0) ? 1 : 0;
    }
    return preds;
}

Metrics metrics_from_predictions(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size() || preds.empty())
        throw std::invalid_argument("metrics: size mismatch or empty");
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == 1 && labels[i] == 1) ++tp;
        else if (preds[i] == 1 && labels[i] == 0) ++fp;
        else if (preds[i] == 0 && labels[i] == 1) ++fn;
        else ++tn;
    }
    Metrics m;
    m.accuracy = (tp + tn) / static_cast<double>(preds.size());
    m.precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

Metrics evaluate(ModelParams& model, const EpochSet& test) {
    test.validate();
    if (test.n_epochs() == 0) throw std::invalid_argument("evaluate: empty test set");
    if (!test.labels) throw std::invalid_argument("evaluate: labels required");
    EpochSet data = zscore(test);
    auto preds = predict(model, data);
    return metrics_from_predictions(preds, *test.labels);
}

}  // namespace mclpd
