#include "mclpd/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "mclpd/augment.hpp"

namespace mclpd {

EpochSet remove_band(const EpochSet& data, double lo_hz, double hi_hz) {
    data.validate();
    if (!(lo_hz >= 0.0 && lo_hz < hi_hz))
        throw std::invalid_argument("remove_band: bad band edges");
    EpochSet out = data;
    const std::size_t t = data.n_samples();
    const std::size_t bins = t / 2 + 1;
    const double bin_hz = data.fs / static_cast<double>(t);
    for (std::size_t e = 0; e < data.n_epochs(); ++e) {
        for (std::size_t c = 0; c < data.n_channels(); ++c) {
            double* x = &out.data.v[(e * data.n_channels() + c) * t];
            auto spec = rfft_complex(x, t);
            for (std::size_t k = 0; k < bins; ++k) {
                const double f = bin_hz * static_cast<double>(k);
                if (f >= lo_hz && f < hi_hz) spec[k] = {0.0, 0.0};
            }
            auto y = irfft_complex(spec.data(), bins, t);
            std::memcpy(x, y.data(), t * sizeof(double));
        }
    }
    return out;
}

EpochSet mask_channel(const EpochSet& data, std::size_t channel) {
    data.validate();
    if (channel >= data.n_channels())
        throw std::invalid_argument("mask_channel: channel index out of range");
    EpochSet out = data;
    const std::size_t t = data.n_samples();
    for (std::size_t e = 0; e < data.n_epochs(); ++e)
        std::fill_n(&out.data.v[(e * data.n_channels() + channel) * t], t, 0.0);
    return out;
}

EpochSet occlude_window(const EpochSet& data, std::size_t window) {
    data.validate();
    if (window >= 10) throw std::invalid_argument("occlude_window: window must be 0..9");
    EpochSet out = data;
    const std::size_t t = data.n_samples();
    const std::size_t w = t / 10;
    const std::size_t lo = window * w;
    const std::size_t hi = window == 9 ? t : (window + 1) * w;  // last absorbs remainder
    for (std::size_t e = 0; e < data.n_epochs(); ++e)
        for (std::size_t c = 0; c < data.n_channels(); ++c)
            std::fill(&out.data.v[(e * data.n_channels() + c) * t + lo],
                      &out.data.v[(e * data.n_channels() + c) * t + hi], 0.0);
    return out;
}

namespace {

const Band& find_band(const std::string& name) {
    for (const auto& b : canonical_bands())
        if (name == b.name) return b;
    throw std::invalid_argument("unknown band: " + name);
}

std::size_t find_channel(const EpochSet& data, const std::string& name) {
    for (std::size_t c = 0; c < data.channel_names.size(); ++c)
        if (data.channel_names[c] == name) return c;
    throw std::invalid_argument("unknown channel: " + name);
}

}  // namespace

double band_importance(ModelParams& model, const EpochSet& test, const std::string& band) {
    const Band& b = find_band(band);
    const double base = evaluate(model, test).accuracy;
    EpochSet perturbed = remove_band(test, b.lo_hz, b.hi_hz);
    return base - evaluate(model, perturbed).accuracy;
}

double channel_importance(ModelParams& model, const EpochSet& test, const std::string& channel) {
    const std::size_t c = find_channel(test, channel);
    const double base = evaluate(model, test).accuracy;
    EpochSet perturbed = mask_channel(test, c);
    return base - evaluate(model, perturbed).accuracy;
}

double window_importance(ModelParams& model, const EpochSet& test, std::size_t window) {
    const double base = evaluate(model, test).accuracy;
    EpochSet perturbed = occlude_window(test, window);
    return base - evaluate(model, perturbed).accuracy;
}

ImportanceReport importance_report(ModelParams& model, const EpochSet& test) {
    ImportanceReport r;
    r.baseline_accuracy = evaluate(model, test).accuracy;
    for (const auto& b : canonical_bands()) {
        EpochSet perturbed = remove_band(test, b.lo_hz, b.hi_hz);
        r.band_scores[b.name] = r.baseline_accuracy - evaluate(model, perturbed).accuracy;
    }
    for (std::size_t c = 0; c < test.n_channels(); ++c) {
        const std::string name =
            c < test.channel_names.size() ? test.channel_names[c] : "CH" + std::to_string(c);
        EpochSet perturbed = mask_channel(test, c);
        r.channel_scores[name] = r.baseline_accuracy - evaluate(model, perturbed).accuracy;
    }
    r.window_scores.resize(10);
    for (std::size_t w = 0; w < 10; ++w) {
        EpochSet perturbed = occlude_window(test, w);
        r.window_scores[w] = r.baseline_accuracy - evaluate(model, perturbed).accuracy;
    }
    return r;
}

namespace {

double total_positive_drop(const ImportanceReport& r) {
    double total = 0.0;
    for (const auto& [k, v] : r.band_scores) total += std::max(0.0, v);
    for (const auto& [k, v] : r.channel_scores) total += std::max(0.0, v);
    for (double v : r.window_scores) total += std::max(0.0, v);
    return total;
}

}  // namespace

std::string report_csv(const ImportanceReport& r) {
    const double total = total_positive_drop(r);
    auto pct = [&](double v) { return total > 0.0 ? 100.0 * std::max(0.0, v) / total : 0.0; };
    std::ostringstream os;
    os << "dimension,name,accuracy_drop,pct_of_total_drop\n";
    os << "baseline,accuracy," << r.baseline_accuracy << ",\n";
    for (const auto& [name, v] : r.band_scores)
        os << "band," << name << ',' << v << ',' << pct(v) << '\n';
    for (const auto& [name, v] : r.channel_scores)
        os << "channel," << name << ',' << v << ',' << pct(v) << '\n';
    for (std::size_t w = 0; w < r.window_scores.size(); ++w)
        os << "window,W" << w << ',' << r.window_scores[w] << ',' << pct(r.window_scores[w])
           << '\n';
    return os.str();
}

std::string report_svg(const ImportanceReport& r, const std::string& dimension) {
    std::vector<std::pair<std::string, double>> rows;
    if (dimension == "band") {
        for (const auto& b : canonical_bands())
            rows.emplace_back(b.name, r.band_scores.count(b.name) ? r.band_scores.at(b.name) : 0.0);
    } else if (dimension == "channel") {
        for (const auto& [name, v] : r.channel_scores) rows.emplace_back(name, v);
    } else if (dimension == "window") {
        for (std::size_t w = 0; w < r.window_scores.size(); ++w)
            rows.emplace_back("W" + std::to_string(w), r.window_scores[w]);
    } else {
        throw std::invalid_argument("report_svg: dimension must be band/channel/window");
    }
    double mx = 1e-12;
    for (const auto& [name, v] : rows) mx = std::max(mx, std::abs(v));
    const int bar_w = 18, gap = 6, chart_h = 220, label_h = 60;
    const int width = static_cast<int>(rows.size()) * (bar_w + gap) + 60;
    const int height = chart_h + label_h + 30;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\">\n";
    os << "<text x=\"10\" y=\"16\" font-size=\"13\">" << dimension
       << " importance (accuracy drop)</text>\n";
    int x = 40;
    for (const auto& [name, v] : rows) {
        const int h = static_cast<int>(std::lround(std::abs(v) / mx * (chart_h - 10)));
        const int y = 20 + (chart_h - h);
        os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\""
           << h << "\" fill=\"" << (v >= 0 ? "#4472c4" : "#c44444") << "\"/>\n";
        os << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << chart_h + 32
           << "\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-60 " << x + bar_w / 2
           << ' ' << chart_h + 32 << ")\">" << name << "</text>\n";
        x += bar_w + gap;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace mclpd
