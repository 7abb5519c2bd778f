#include "mclpd/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace mclpd {

using nlohmann::json;

namespace {

struct Writer {
    std::ofstream out;
    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw IoError("cannot open for writing: " + path);
    }
    void bytes(const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    template <class T>
    void pod(T v) {
        bytes(&v, sizeof(T));
    }
};

struct Reader {
    std::vector<char> buf;
    std::size_t pos = 0;
    std::string path;
    explicit Reader(const std::string& p) : path(p) {
        std::ifstream in(p, std::ios::binary | std::ios::ate);
        if (!in) throw IoError("cannot open: " + p);
        const auto size = in.tellg();
        in.seekg(0);
        buf.resize(static_cast<std::size_t>(size));
        in.read(buf.data(), size);
        if (!in) throw IoError("short read: " + p);
    }
    void bytes(void* p, std::size_t n) {
        if (pos + n > buf.size()) throw CorruptFileError("truncated file: " + path);
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    template <class T>
    T pod() {
        T v;
        bytes(&v, sizeof(T));
        return v;
    }
    std::size_t remaining() const { return buf.size() - pos; }
};

}  // namespace

void write_container(const std::string& path, const EpochSet& data) {
    data.validate();
    Writer w(path);
    w.bytes("MCLP", 4);
    w.pod<std::uint16_t>(kContainerVersion);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(data.n_epochs()));
    w.pod<std::uint16_t>(static_cast<std::uint16_t>(data.n_channels()));
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(data.n_samples()));
    w.pod<float>(static_cast<float>(data.fs));
    w.pod<std::uint8_t>(data.labels ? 1 : 0);
    for (std::size_t c = 0; c < data.n_channels(); ++c) {
        const std::string name =
            c < data.channel_names.size() ? data.channel_names[c] : "CH" + std::to_string(c);
        w.pod<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
    }
    for (int s : data.subject_ids) w.pod<std::uint32_t>(static_cast<std::uint32_t>(s));
    if (data.labels)
        for (int l : *data.labels) w.pod<std::uint8_t>(static_cast<std::uint8_t>(l));
    std::vector<float> row(data.n_samples());
    for (std::size_t e = 0; e < data.n_epochs(); ++e)
        for (std::size_t c = 0; c < data.n_channels(); ++c) {
            const double* src = &data.data.v[(e * data.n_channels() + c) * data.n_samples()];
            for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(src[i]);
            w.bytes(row.data(), row.size() * sizeof(float));
        }
    if (!w.out) throw IoError("write failed: " + path);
}

EpochSet read_container(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "MCLP", 4) != 0)
        throw CorruptFileError("bad container magic: " + path);
    const auto version = r.pod<std::uint16_t>();
    if (version != kContainerVersion)
        throw CorruptFileError("unsupported container version " + std::to_string(version));
    const auto n_epochs = r.pod<std::uint32_t>();
    const auto n_channels = r.pod<std::uint16_t>();
    const auto n_samples = r.pod<std::uint32_t>();
    const auto fs = r.pod<float>();
    const auto flags = r.pod<std::uint8_t>();
    const bool has_labels = (flags & 1u) != 0;

    EpochSet out;
    out.fs = static_cast<double>(fs);
    out.channel_names.resize(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c) {
        const auto len = r.pod<std::uint16_t>();
        std::string name(len, '\0');
        r.bytes(name.data(), len);
        out.channel_names[c] = std::move(name);
    }
    const std::size_t expect =
        4ull * n_epochs + (has_labels ? n_epochs : 0) +
        4ull * n_epochs * n_channels * n_samples;
    if (r.remaining() != expect)
        throw CorruptFileError("container length mismatch: " + path + " (expected " +
                               std::to_string(expect) + " payload bytes, found " +
                               std::to_string(r.remaining()) + ")");
    out.subject_ids.resize(n_epochs);
    for (std::size_t e = 0; e < n_epochs; ++e)
        out.subject_ids[e] = static_cast<int>(r.pod<std::uint32_t>());
    if (has_labels) {
        out.labels = std::vector<int>(n_epochs);
        for (std::size_t e = 0; e < n_epochs; ++e)
            (*out.labels)[e] = static_cast<int>(r.pod<std::uint8_t>());
    }
    out.data = Tensor({n_epochs, n_channels, n_samples});
    std::vector<float> row(n_samples);
    for (std::size_t e = 0; e < n_epochs; ++e)
        for (std::size_t c = 0; c < n_channels; ++c) {
            r.bytes(row.data(), row.size() * sizeof(float));
            double* dst = &out.data.v[(e * n_channels + c) * n_samples];
            for (std::size_t i = 0; i < row.size(); ++i) dst[i] = static_cast<double>(row[i]);
        }
    out.validate();
    return out;
}

// ---- checkpoints ------------------------------------------------------------

namespace {

json dims_to_json(const EncoderDims& d) {
    return json{{"in_channels", d.in_channels},
                {"widths", {d.widths[0], d.widths[1], d.widths[2]}},
                {"kernels", {d.kernels[0], d.kernels[1], d.kernels[2]}},
                {"strides", {d.strides[0], d.strides[1], d.strides[2]}},
                {"embed_dim", d.embed_dim},
                {"proj_hidden", d.proj_hidden},
                {"proj_dim", d.proj_dim},
                {"n_classes", d.n_classes},
                {"bn_momentum", d.bn_momentum},
                {"bn_eps", d.bn_eps}};
}

EncoderDims dims_from_json(const json& j) {
    EncoderDims d;
    d.in_channels = j.at("in_channels").get<std::size_t>();
    for (int i = 0; i < 3; ++i) {
        d.widths[i] = j.at("widths").at(i).get<std::size_t>();
        d.kernels[i] = j.at("kernels").at(i).get<std::size_t>();
        d.strides[i] = j.at("strides").at(i).get<std::size_t>();
    }
    d.embed_dim = j.at("embed_dim").get<std::size_t>();
    d.proj_hidden = j.at("proj_hidden").get<std::size_t>();
    d.proj_dim = j.at("proj_dim").get<std::size_t>();
    d.n_classes = j.at("n_classes").get<std::size_t>();
    d.bn_momentum = j.at("bn_momentum").get<double>();
    d.bn_eps = j.at("bn_eps").get<double>();
    return d;
}

}  // namespace

void write_checkpoint(const std::string& path, const ModelParams& model,
                      const CheckpointMeta& meta) {
    json manifest;
    manifest["config_hash"] = meta.config_hash;
    manifest["seed"] = meta.seed;
    manifest["epoch"] = meta.epoch;
    manifest["metrics"] = meta.metrics;
    manifest["dims"] = dims_to_json(model.dims);
    const std::string mtext = manifest.dump();

    Writer w(path);
    w.bytes("MCKP", 4);
    w.pod<std::uint16_t>(kCheckpointVersion);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(mtext.size()));
    w.bytes(mtext.data(), mtext.size());
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(model.set.items.size()));
    for (const auto& p : model.set.items) {
        w.pod<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
        w.bytes(p.name.data(), p.name.size());
        w.pod<std::int32_t>(p.depth);
        w.pod<std::uint8_t>(p.trainable ? 1 : 0);
        w.pod<std::uint8_t>(static_cast<std::uint8_t>(p.value.rank()));
        for (auto d : p.value.shape) w.pod<std::uint32_t>(static_cast<std::uint32_t>(d));
        w.bytes(p.value.data(), p.value.size() * sizeof(double));
    }
    if (!w.out) throw IoError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "MCKP", 4) != 0)
        throw CorruptFileError("bad checkpoint magic: " + path);
    const auto version = r.pod<std::uint16_t>();
    if (version != kCheckpointVersion)
        throw CorruptFileError("unsupported checkpoint version " + std::to_string(version));
    const auto mlen = r.pod<std::uint32_t>();
    std::string mtext(mlen, '\0');
    r.bytes(mtext.data(), mlen);
    json manifest;
    try {
        manifest = json::parse(mtext);
    } catch (const json::exception&) {
        throw CorruptFileError("unparsable checkpoint manifest: " + path);
    }

    Checkpoint ck;
    ck.meta.config_hash = manifest.value("config_hash", "");
    ck.meta.seed = manifest.value("seed", 0ull);
    ck.meta.epoch = manifest.value("epoch", std::size_t{0});
    if (manifest.contains("metrics"))
        ck.meta.metrics = manifest["metrics"].get<std::map<std::string, double>>();
    ck.model.dims = dims_from_json(manifest.at("dims"));

    const auto n_tensors = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const auto name_len = r.pod<std::uint16_t>();
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len);
        const auto depth = r.pod<std::int32_t>();
        const bool trainable = r.pod<std::uint8_t>() != 0;
        const auto ndim = r.pod<std::uint8_t>();
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = r.pod<std::uint32_t>();
        Tensor t(shape);
        r.bytes(t.data(), t.size() * sizeof(double));
        ck.model.set.add(name, depth, std::move(t), trainable);
    }
    if (r.remaining() != 0) throw CorruptFileError("trailing bytes in checkpoint: " + path);
    return ck;
}

std::uint64_t fnv1a(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char buf[65536];
    std::uint64_t h = 14695981039346656037ULL;
    while (in) {
        in.read(buf, sizeof(buf));
        const auto n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace mclpd
