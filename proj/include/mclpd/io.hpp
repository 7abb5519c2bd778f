#pragma once
// Binary file formats: the MCLP epoch container and the MCKP model
// checkpoint. Both formats are little-endian and round-trip bit-exactly.
//
// Container layout:
//   magic "MCLP" | u16 version | u32 n_epochs | u16 n_channels |
//   u32 n_samples | f32 fs_hz | u8 flags (bit0: labels present) |
//   channel-name table (per name: u16 length + UTF-8 bytes) |
//   u32 subject_ids[n_epochs] | u8 labels[n_epochs] (if flagged) |
//   f32 data, epoch-major, channel-major, time-minor.
// The remaining byte length after the name table is exactly computable from
// the header; any mismatch is reported as a corrupt file.
//
// Checkpoint layout:
//   magic "MCKP" | u16 version | u32 manifest_len | manifest JSON |
//   u32 n_tensors | per tensor: u16 name_len + name | i32 depth |
//   u8 trainable | u8 ndim | u32 dims[ndim] | f64 data.
// The manifest carries config hash, seed, epoch, metric snapshot, and the
// encoder dimensions needed to rebuild the model.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "mclpd/encoder.hpp"
#include "mclpd/signal.hpp"

namespace mclpd {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CorruptFileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr std::uint16_t kContainerVersion = 1;
constexpr std::uint16_t kCheckpointVersion = 1;

void write_container(const std::string& path, const EpochSet& data);
EpochSet read_container(const std::string& path);

struct CheckpointMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    std::map<std::string, double> metrics;
};

void write_checkpoint(const std::string& path, const ModelParams& model,
                      const CheckpointMeta& meta);

struct Checkpoint {
    ModelParams model;
    CheckpointMeta meta;
};
Checkpoint read_checkpoint(const std::string& path);

// FNV-1a 64-bit content hashes used by run manifests.
std::uint64_t fnv1a(const void* data, std::size_t len);
std::uint64_t fnv1a_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

}  // namespace mclpd
