#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mclpd/interpret.hpp"
#include "mclpd/synth.hpp"

using namespace mclpd;

namespace {

SynthSpec small_site(std::uint64_t seed) {
    SynthSpec spec = default_spec("siteA", seed);
    spec.n_channels = 8;
    spec.dur = 1.0;
    spec.n_subjects_per_class = 6;
    spec.epochs_per_subject = 10;
    spec.signature_channels = {"F3", "Fz", "F4"};
    return spec;
}

RunConfig small_config(std::uint64_t seed) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.encoder.in_channels = 8;
    cfg.encoder.widths[0] = 8;
    cfg.encoder.widths[1] = 12;
    cfg.encoder.widths[2] = 16;
    cfg.encoder.embed_dim = 16;
    cfg.encoder.proj_hidden = 16;
    cfg.encoder.proj_dim = 8;
    cfg.finetune.epochs = 12;
    cfg.finetune.batch = 16;
    cfg.finetune.label_fraction = 0.5;
    cfg.finetune.test_fraction = 0.5;
    cfg.finetune.val_fraction = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("remove_band zeroes exactly the in-band bins") {
    EpochSet data = generate(small_site(1));
    EpochSet cut = remove_band(data, 13.0, 30.0);
    const std::size_t t = data.n_samples();
    const double bin_hz = data.fs / static_cast<double>(t);
    for (std::size_t e = 0; e < 3; ++e) {
        for (std::size_t c = 0; c < data.n_channels(); ++c) {
            auto before = rfft_complex(&data.data.v[(e * data.n_channels() + c) * t], t);
            auto after = rfft_complex(&cut.data.v[(e * data.n_channels() + c) * t], t);
            for (std::size_t k = 0; k < after.size(); ++k) {
                const double f = bin_hz * static_cast<double>(k);
                if (f >= 13.0 && f < 30.0) {
                    CHECK(std::abs(after[k]) < 1e-9);
                } else {
                    CHECK(std::abs(after[k] - before[k]) <
                          1e-9 * (1.0 + std::abs(before[k])));
                }
            }
        }
    }
}

TEST_CASE("occlude_window geometry, including the remainder rule") {
    EpochSet data = generate(small_site(2));
    const std::size_t t = data.n_samples();  // 500
    EpochSet occ = occlude_window(data, 3);
    const std::size_t w = t / 10;
    for (std::size_t i = 0; i < t; ++i) {
        const double v = occ.data.at(0, 0, i);
        if (i >= 3 * w && i < 4 * w)
            CHECK(v == 0.0);
        else
            CHECK(v == data.data.at(0, 0, i));
    }
    // non-divisible length: last window absorbs the remainder
    EpochSet odd;
    odd.fs = 100.0;
    odd.data = Tensor({1, 1, 23});
    for (std::size_t i = 0; i < 23; ++i) odd.data.v[i] = 1.0;
    odd.subject_ids = {0};
    EpochSet occ9 = occlude_window(odd, 9);
    std::size_t zeros = 0;
    for (double v : occ9.data.v) zeros += v == 0.0 ? 1 : 0;
    CHECK(zeros == 5);  // samples 18..22
    CHECK(occ9.data.v[17] == 1.0);
    CHECK_THROWS_AS(occlude_window(odd, 10), std::invalid_argument);
}

TEST_CASE("a model that structurally ignores a channel scores it exactly zero") {
    EpochSet data = generate(small_site(3));
    RunConfig cfg = small_config(5);
    ModelParams m = init_model(cfg.encoder, 9);
    // zero every first-layer kernel slice that reads channel 2 (raw and
    // spectrum copies in the tf branch)
    const std::size_t dead = 2;
    Tensor& w = m.set.get("tf.conv1.W").value;
    const std::size_t cin = w.dim(1), k = w.dim(2);
    for (std::size_t co = 0; co < w.dim(0); ++co)
        for (std::size_t kk = 0; kk < k; ++kk) {
            w.v[(co * cin + dead) * k + kk] = 0.0;
            w.v[(co * cin + dead + 8) * k + kk] = 0.0;
        }
    const double score = channel_importance(m, data, data.channel_names[dead]);
    CHECK(score == 0.0);
    CHECK_THROWS_AS(channel_importance(m, data, "NOPE"), std::invalid_argument);
}

TEST_CASE("trained model: beta band ranks first; injected channel ranks first") {
    // class signature lives in the beta band on channels F3/Fz/F4
    EpochSet data = generate(small_site(7));
    RunConfig cfg = small_config(11);
    ModelParams init = init_model(cfg.encoder, cfg.seed);
    FinetuneResult ft = finetune(init, data, cfg);
    REQUIRE(ft.test_metrics.accuracy > 0.8);

    EpochSet test = subset(data, [&] {
        std::vector<std::size_t> idx;
        for (std::size_t e = 0; e < data.n_epochs(); ++e)
            if (std::find(ft.test_subjects.begin(), ft.test_subjects.end(),
                          data.subject_ids[e]) != ft.test_subjects.end())
                idx.push_back(e);
        return idx;
    }());

    ImportanceReport r = importance_report(ft.model, test);
    REQUIRE(r.window_scores.size() == 10);
    // beta strictly dominates the other bands
    const double beta = r.band_scores.at("beta");
    for (const auto& [name, v] : r.band_scores)
        if (name != "beta") CHECK(beta > v);

    // reruns reproduce the same scores exactly
    ImportanceReport r2 = importance_report(ft.model, test);
    CHECK(r2.baseline_accuracy == r.baseline_accuracy);
    for (const auto& [name, v] : r.band_scores) CHECK(r2.band_scores.at(name) == v);
    for (const auto& [name, v] : r.channel_scores) CHECK(r2.channel_scores.at(name) == v);
    for (std::size_t w = 0; w < 10; ++w) CHECK(r2.window_scores[w] == r.window_scores[w]);

    // single-channel signature: that channel dominates channel importance
    SynthSpec one = small_site(13);
    one.signature_channels = {"F3"};
    EpochSet data1 = generate(one);
    RunConfig cfg1 = small_config(17);
    FinetuneResult ft1 = finetune(init_model(cfg1.encoder, cfg1.seed), data1, cfg1);
    REQUIRE(ft1.test_metrics.accuracy > 0.8);
    EpochSet test1 = subset(data1, [&] {
        std::vector<std::size_t> idx;
        for (std::size_t e = 0; e < data1.n_epochs(); ++e)
            if (std::find(ft1.test_subjects.begin(), ft1.test_subjects.end(),
                          data1.subject_ids[e]) != ft1.test_subjects.end())
                idx.push_back(e);
        return idx;
    }());
    ImportanceReport r1 = importance_report(ft1.model, test1);
    const double target = r1.channel_scores.at("F3");
    for (const auto& [name, v] : r1.channel_scores)
        if (name != "F3") CHECK(target >= v);
}

TEST_CASE("occluding every window equals an all-zero input") {
    EpochSet data = generate(small_site(19));
    RunConfig cfg = small_config(23);
    ModelParams m = init_model(cfg.encoder, 29);
    EpochSet wiped = data;
    for (std::size_t w = 0; w < 10; ++w) wiped = occlude_window(wiped, w);
    for (double v : wiped.data.v) CHECK(v == 0.0);
    EpochSet zeros = data;
    zeros.data.fill(0.0);
    CHECK(evaluate(m, wiped).accuracy == evaluate(m, zeros).accuracy);
}

TEST_CASE("report serialization") {
    ImportanceReport r;
    r.baseline_accuracy = 0.9;
    for (const auto& b : canonical_bands()) r.band_scores[b.name] = 0.01;
    r.band_scores["beta"] = 0.2;
    r.channel_scores["F3"] = 0.1;
    r.channel_scores["Fz"] = -0.01;
    r.window_scores.assign(10, 0.005);
    const std::string csv = report_csv(r);
    CHECK(csv.find("dimension,name,accuracy_drop,pct_of_total_drop") == 0);
    CHECK(csv.find("band,beta,0.2") != std::string::npos);
    CHECK(csv.find("channel,F3,0.1") != std::string::npos);
    CHECK(csv.find("window,W9,") != std::string::npos);
    for (const char* dim : {"band", "channel", "window"}) {
        const std::string svg = report_svg(r, dim);
        CHECK(svg.find("<svg") == 0);
        CHECK(svg.find("</svg>") != std::string::npos);
    }
    CHECK_THROWS_AS(report_svg(r, "nope"), std::invalid_argument);
}
