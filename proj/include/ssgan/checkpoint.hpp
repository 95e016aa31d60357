#pragma once

// Versioned binary parameter snapshots. File layout:
//   magic "SSGK" | version u32 LE | header length u32 LE | UTF-8 JSON header
//   | concatenated float32 LE tensor payloads
// The header holds step, config_hash, the effective config object, and the
// tensor directory (name, rank, extents, offset into the payload region).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssgan/tensor.hpp"

namespace ssgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
    std::string name;
    Tensor<float> value;
};

struct Checkpoint {
    std::int64_t step = 0;
    std::string config_hash;       // fnv1a64_hex of the canonical config dump
    nlohmann::json config;         // effective config, embedded verbatim
    std::vector<CheckpointTensor> tensors; // directory order == payload order
    // Set on load when config_hash does not fingerprint the embedded config;
    // surfaced as a warning, not an error.
    bool hash_mismatch = false;

    bool has(const std::string& name) const;
    const Tensor<float>& tensor(const std::string& name) const;
    void add(std::string name, Tensor<float> value); // duplicate name -> contract error
};

// FNV-1a 64-bit over the compact dump; stable content fingerprint for configs.
std::string fnv1a64_hex(const std::string& bytes);
std::string config_hash_hex(const nlohmann::json& config);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// In-memory codec, exposed so corruption tests can fuzz bytes directly.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin);

} // namespace ssgan
