#include "mclpd/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mclpd/signal.hpp"

namespace mclpd {

const char* branch_prefix(Branch b) {
    switch (b) {
        case Branch::Time: return "time";
        case Branch::Freq: return "freq";
        case Branch::TimeFreq: return "tf";
    }
    return "?";
}

Param& ParamSet::add(const std::string& name, int depth, Tensor value, bool trainable) {
    if (find(name)) throw std::logic_error("ParamSet: duplicate " + name);
    items.push_back(Param{name, depth, trainable, std::move(value), {}});
    Param& p = items.back();
    p.grad = Tensor(p.value.shape);
    return p;
}

Param* ParamSet::find(const std::string& name) {
    for (auto& p : items)
        if (p.name == name) return &p;
    return nullptr;
}
const Param* ParamSet::find(const std::string& name) const {
    for (const auto& p : items)
        if (p.name == name) return &p;
    return nullptr;
}
Param& ParamSet::get(const std::string& name) {
    if (Param* p = find(name)) return *p;
    throw std::out_of_range("ParamSet: missing " + name);
}
const Param& ParamSet::get(const std::string& name) const {
    if (const Param* p = find(name)) return *p;
    throw std::out_of_range("ParamSet: missing " + name);
}
void ParamSet::zero_grads() {
    for (auto& p : items) p.grad.fill(0.0);
}
bool ParamSet::grads_finite() const {
    for (const auto& p : items)
        if (p.trainable && !all_finite(p.grad)) return false;
    return true;
}

namespace {

std::size_t branch_in_channels(Branch b, const EncoderDims& d) {
    return b == Branch::TimeFreq ? 2 * d.in_channels : d.in_channels;
}

void init_branch(ParamSet& set, Branch b, const EncoderDims& d, Rng& rng) {
    const std::string pre = branch_prefix(b);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::size_t cin = branch_in_channels(b, d);
    for (int blk = 0; blk < 3; ++blk) {
        const std::size_t cout = d.widths[blk], k = d.kernels[blk];
        Tensor w({cout, cin, k});
        const double sd = std::sqrt(2.0 / static_cast<double>(cin * k));
        for (auto& v : w.v) v = gauss(rng) * sd;
        const std::string tag = pre + ".conv" + std::to_string(blk + 1);
        set.add(tag + ".W", blk + 1, std::move(w));
        set.add(tag + ".b", blk + 1, Tensor({cout}));
        const std::string bn = pre + ".bn" + std::to_string(blk + 1);
        set.add(bn + ".gamma", blk + 1, Tensor::full({cout}, 1.0));
        set.add(bn + ".beta", blk + 1, Tensor({cout}));
        set.add(bn + ".running_mean", blk + 1, Tensor({cout}), false);
        set.add(bn + ".running_var", blk + 1, Tensor::full({cout}, 1.0), false);
        cin = cout;
    }
    Tensor w1({d.proj_hidden, d.embed_dim});
    double sd = std::sqrt(2.0 / static_cast<double>(d.embed_dim));
    for (auto& v : w1.v) v = gauss(rng) * sd;
    Tensor w2({d.proj_dim, d.proj_hidden});
    sd = std::sqrt(1.0 / static_cast<double>(d.proj_hidden));
    for (auto& v : w2.v) v = gauss(rng) * sd;
    set.add(pre + ".proj.W1", 4, std::move(w1));
    set.add(pre + ".proj.b1", 4, Tensor({d.proj_hidden}));
    set.add(pre + ".proj.W2", 4, std::move(w2));
    set.add(pre + ".proj.b2", 4, Tensor({d.proj_dim}));
}

}  // namespace

ModelParams init_model(const EncoderDims& dims, std::uint64_t seed) {
    if (dims.embed_dim != dims.widths[2])
        throw std::invalid_argument("encoder: embed_dim must equal final conv width");
    ModelParams m;
    m.dims = dims;
    Rng rng = make_rng(seed, stream::kInit);
    init_branch(m.set, Branch::Time, dims, rng);
    init_branch(m.set, Branch::Freq, dims, rng);
    init_branch(m.set, Branch::TimeFreq, dims, rng);
    Tensor wc({dims.n_classes, dims.embed_dim});
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sd = std::sqrt(1.0 / static_cast<double>(dims.embed_dim));
    for (auto& v : wc.v) v = gauss(rng) * sd;
    m.set.add("cls.W", 4, std::move(wc));
    m.set.add("cls.b", 4, Tensor({dims.n_classes}));
    return m;
}

ModelParams clone_values(const ModelParams& m) {
    ModelParams out;
    out.dims = m.dims;
    for (const auto& p : m.set.items) out.set.add(p.name, p.depth, p.value, p.trainable);
    return out;
}

namespace {

// per-channel standardized two-sided magnitude spectrum, mirrored to length T
void magnitude_trace(const double* src, std::size_t t, double* mag) {
    const std::size_t bins = t / 2 + 1;
    auto X = rfft_complex(src, t);
    for (std::size_t i = 0; i < t; ++i) {
        const std::size_t k = i < bins ? i : t - i;
        mag[i] = std::abs(X[k]);
    }
    zscore_trace(mag, t);  // keep conv inputs unit-scale
}

}  // namespace

Tensor branch_input(Branch b, const Tensor& x) {
    if (x.rank() != 3) throw std::invalid_argument("encode: input must be [B,C,T]");
    if (b == Branch::Time) return x;
    const std::size_t batch = x.dim(0), ch = x.dim(1), t = x.dim(2);
    const std::size_t out_ch = b == Branch::Freq ? ch : 2 * ch;
    Tensor out({batch, out_ch, t});
    std::vector<double> mag(t);
    for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t c = 0; c < ch; ++c) {
            const double* src = &x.v[(s * ch + c) * t];
            magnitude_trace(src, t, mag.data());
            if (b == Branch::Freq) {
                std::copy(mag.begin(), mag.end(), &out.v[(s * ch + c) * t]);
            } else {
                // raw first, spectrum second
                std::copy(src, src + t, &out.v[(s * out_ch + c) * t]);
                std::copy(mag.begin(), mag.end(), &out.v[(s * out_ch + ch + c) * t]);
            }
        }
    }
    return out;
}

BranchInputs prepare_branch_inputs(const Tensor& x) {
    if (x.rank() != 3) throw std::invalid_argument("encode: input must be [B,C,T]");
    const std::size_t batch = x.dim(0), ch = x.dim(1), t = x.dim(2);
    BranchInputs out;
    out.time = x;
    out.freq = Tensor({batch, ch, t});
    out.tf = Tensor({batch, 2 * ch, t});
    parallel_for(batch * ch, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> mag(t);
        for (std::size_t i = lo; i < hi; ++i) {
            const std::size_t s = i / ch, c = i % ch;
            const double* src = &x.v[(s * ch + c) * t];
            magnitude_trace(src, t, mag.data());
            std::copy(mag.begin(), mag.end(), &out.freq.v[(s * ch + c) * t]);
            std::copy(src, src + t, &out.tf.v[(s * 2 * ch + c) * t]);
            std::copy(mag.begin(), mag.end(), &out.tf.v[(s * 2 * ch + ch + c) * t]);
        }
    });
    return out;
}

Mat encode(ModelParams& m, Branch b, const Tensor& x_raw, const ForwardOpts& opts,
           BranchCache* cache) {
    if (x_raw.rank() != 3 || x_raw.dim(1) != m.dims.in_channels)
        throw std::invalid_argument("encode: input shape mismatch");
    return encode_prepared(m, b, branch_input(b, x_raw), opts, cache);
}

Mat encode_prepared(ModelParams& m, Branch b, const Tensor& prepared, const ForwardOpts& opts,
                    BranchCache* cache) {
    const std::size_t want =
        b == Branch::TimeFreq ? 2 * m.dims.in_channels : m.dims.in_channels;
    if (prepared.rank() != 3 || prepared.dim(1) != want)
        throw std::invalid_argument("encode: prepared input shape mismatch");
    const std::string pre = branch_prefix(b);
    Tensor cur = prepared;
    if (cache) {
        cache->input = cur;
        cache->post.clear();
        cache->bn.assign(3, {});
        cache->post.reserve(3);
    }
    for (int blk = 0; blk < 3; ++blk) {
        const std::string tag = pre + ".conv" + std::to_string(blk + 1);
        const std::string bn = pre + ".bn" + std::to_string(blk + 1);
        Tensor z = conv1d_forward(cur, m.set.get(tag + ".W").value, m.set.get(tag + ".b").value,
                                  m.dims.strides[blk]);
        const bool blk_train =
            opts.block_train.empty() ? opts.train : opts.block_train[static_cast<size_t>(blk)];
        Tensor y = batchnorm_forward(
            z, m.set.get(bn + ".gamma").value, m.set.get(bn + ".beta").value,
            m.set.get(bn + ".running_mean").value, m.set.get(bn + ".running_var").value,
            blk_train, blk_train && opts.update_running, m.dims.bn_momentum, m.dims.bn_eps,
            cache ? &cache->bn[static_cast<size_t>(blk)] : nullptr);
        relu_inplace(y);
        if (cache) cache->post.push_back(y);
        cur = std::move(y);
    }
    if (cache) cache->last_len = cur.dim(2);
    return gap_forward(cur);
}

void encode_backward(ModelParams& m, Branch b, const BranchCache& cache, const Mat& dh,
                     int stop_block) {
    const std::string pre = branch_prefix(b);
    Tensor dy = gap_backward(dh, cache.last_len);
    for (int blk = 2; blk >= stop_block; --blk) {
        const std::string tag = pre + ".conv" + std::to_string(blk + 1);
        const std::string bn = pre + ".bn" + std::to_string(blk + 1);
        const Tensor& post = cache.post[static_cast<size_t>(blk)];
        relu_backward_inplace(dy, post);
        Tensor dz(post.shape);
        batchnorm_backward(dy, cache.bn[static_cast<size_t>(blk)],
                           m.set.get(bn + ".gamma").value, &dz,
                           m.set.get(bn + ".gamma").grad, m.set.get(bn + ".beta").grad);
        const Tensor& x_in = blk == 0 ? cache.input : cache.post[static_cast<size_t>(blk - 1)];
        const bool need_dx = blk > stop_block && blk > 0;
        Tensor dx(need_dx ? x_in.shape : std::vector<std::size_t>{1, 1, 1});
        conv1d_backward(dz, x_in, m.set.get(tag + ".W").value, m.dims.strides[blk],
                        need_dx ? &dx : nullptr, m.set.get(tag + ".W").grad,
                        m.set.get(tag + ".b").grad);
        if (!need_dx) break;
        dy = std::move(dx);
    }
}

Mat project(const ModelParams& m, Branch b, const Mat& h, ProjCache* cache) {
    const std::string pre = branch_prefix(b);
    Mat a = linear_forward(h, m.set.get(pre + ".proj.W1").value,
                           m.set.get(pre + ".proj.b1").value);
    for (auto& v : a.v) v = v > 0.0 ? v : 0.0;
    Mat z = linear_forward(a, m.set.get(pre + ".proj.W2").value,
                           m.set.get(pre + ".proj.b2").value);
    if (cache) {
        cache->h_in = h;
        cache->hidden = std::move(a);
    }
    return z;
}

void project_backward(ModelParams& m, Branch b, const ProjCache& cache, const Mat& dz,
                      Mat* dh) {
    const std::string pre = branch_prefix(b);
    Mat da;
    linear_backward(dz, cache.hidden, m.set.get(pre + ".proj.W2").value, &da,
                    m.set.get(pre + ".proj.W2").grad, m.set.get(pre + ".proj.b2").grad);
    for (std::size_t i = 0; i < da.v.size(); ++i)
        if (cache.hidden.v[i] <= 0.0) da.v[i] = 0.0;
    linear_backward(da, cache.h_in, m.set.get(pre + ".proj.W1").value, dh,
                    m.set.get(pre + ".proj.W1").grad, m.set.get(pre + ".proj.b1").grad);
}

Mat classify(const ModelParams& m, const Mat& h_tf, Mat* cache_h) {
    if (cache_h) *cache_h = h_tf;
    return linear_forward(h_tf, m.set.get("cls.W").value, m.set.get("cls.b").value);
}

void classify_backward(ModelParams& m, const Mat& h_in, const Mat& dlogits, Mat* dh) {
    linear_backward(dlogits, h_in, m.set.get("cls.W").value, dh, m.set.get("cls.W").grad,
                    m.set.get("cls.b").grad);
}

Mat tf_projection(ModelParams& m, const Tensor& x_raw) {
    ForwardOpts opts;
    opts.train = false;
    Mat h = encode(m, Branch::TimeFreq, x_raw, opts, nullptr);
    return project(m, Branch::TimeFreq, h, nullptr);
}

void recompute_bn_stats(ModelParams& m, const std::vector<Branch>& branches,
                        const Tensor& data, std::size_t batch_size) {
    const std::size_t n = data.dim(0), c = data.dim(1), t = data.dim(2);
    if (n == 0) throw std::invalid_argument("recompute_bn_stats: empty data");
    // Reset, then accumulate batch stats with a cumulative-average momentum.
    for (auto& p : m.set.items) {
        if (p.name.find(".running_mean") != std::string::npos) p.value.fill(0.0);
        if (p.name.find(".running_var") != std::string::npos) p.value.fill(1.0);
    }
    const double saved_momentum = m.dims.bn_momentum;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += batch_size, ++batch_index) {
        const std::size_t bs = std::min(batch_size, n - start);
        Tensor x({bs, c, t});
        std::copy(&data.v[start * c * t], &data.v[(start + bs) * c * t], x.v.begin());
        m.dims.bn_momentum = 1.0 / static_cast<double>(batch_index + 1);
        ForwardOpts opts;
        opts.train = true;
        opts.update_running = true;
        for (Branch b : branches) encode(m, b, x, opts, nullptr);
    }
    m.dims.bn_momentum = saved_momentum;
}

}  // namespace mclpd
