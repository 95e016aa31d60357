#include "ssgan/checkpoint.hpp"

#include <bit>
#include <cstdio>

#include "ssgan/byte_io.hpp"
#include "ssgan/errors.hpp"

namespace ssgan {

namespace {

using nlohmann::json;

constexpr char kCheckpointMagic[4] = {'S', 'S', 'G', 'K'};
constexpr std::int64_t kMaxTensorElems = std::int64_t(1) << 31;

} // namespace

bool Checkpoint::has(const std::string& name) const {
    for (const CheckpointTensor& t : tensors) {
        if (t.name == name) return true;
    }
    return false;
}

const Tensor<float>& Checkpoint::tensor(const std::string& name) const {
    for (const CheckpointTensor& t : tensors) {
        if (t.name == name) return t.value;
    }
    throw ContractError("checkpoint has no tensor named '" + name + "'");
}

void Checkpoint::add(std::string name, Tensor<float> value) {
    if (has(name)) {
        throw ContractError("checkpoint already holds a tensor named '" + name + "'");
    }
    tensors.push_back(CheckpointTensor{std::move(name), std::move(value)});
}

std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string config_hash_hex(const json& config) { return fnv1a64_hex(config.dump()); }

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
    json directory = json::array();
    std::uint64_t offset = 0;
    for (const CheckpointTensor& t : checkpoint.tensors) {
        const Shape& shape = t.value.shape();
        json extents = json::array();
        for (int i = 0; i < shape.rank(); ++i) extents.push_back(shape.dim(i));
        directory.push_back(json{{"name", t.name},
                                 {"rank", shape.rank()},
                                 {"extents", extents},
                                 {"offset", offset}});
        offset += static_cast<std::uint64_t>(t.value.size()) * 4;
    }
    json header;
    header["step"] = checkpoint.step;
    header["config_hash"] = checkpoint.config_hash;
    header["config"] = checkpoint.config;
    header["tensors"] = directory;
    const std::string header_str = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(12 + header_str.size() + offset);
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
    put_u32_le(out, kCheckpointVersion);
    put_u32_le(out, static_cast<std::uint32_t>(header_str.size()));
    out.insert(out.end(), header_str.begin(), header_str.end());
    for (const CheckpointTensor& t : checkpoint.tensors) {
        for (std::int64_t i = 0; i < t.value.size(); ++i) {
            put_u32_le(out, std::bit_cast<std::uint32_t>(t.value[i]));
        }
    }
    return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    if (bytes.size() < 12) {
        format_fail(origin, bytes.size(), "file shorter than the fixed 12-byte prefix");
    }
    for (std::size_t i = 0; i < 4; ++i) {
        if (bytes[i] != static_cast<std::uint8_t>(kCheckpointMagic[i])) {
            format_fail(origin, i, "bad magic (expected \"SSGK\")");
        }
    }
    const std::uint32_t version = get_u32_le(bytes, 4);
    if (version != kCheckpointVersion) {
        format_fail(origin, 4,
                    "unsupported version " + std::to_string(version) + " (supported: " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint32_t header_len = get_u32_le(bytes, 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) {
        format_fail(origin, bytes.size(), "truncated header (declared " +
                                              std::to_string(header_len) + " bytes)");
    }
    json header;
    try {
        header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const json::exception& e) {
        format_fail(origin, 12, std::string("header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("step") || !header.contains("config_hash") ||
        !header.contains("config") || !header.contains("tensors") ||
        !header.at("tensors").is_array()) {
        format_fail(origin, 12, "header must carry step, config_hash, config and tensors");
    }
    if (!header.at("step").is_number_integer() || !header.at("config_hash").is_string()) {
        format_fail(origin, 12, "header step/config_hash have wrong types");
    }

    Checkpoint checkpoint;
    checkpoint.step = header.at("step").get<std::int64_t>();
    checkpoint.config_hash = header.at("config_hash").get<std::string>();
    checkpoint.config = header.at("config");
    checkpoint.hash_mismatch = checkpoint.config_hash != config_hash_hex(checkpoint.config);

    const std::size_t payload_start = 12 + header_len;
    const std::size_t payload_size = bytes.size() - payload_start;
    std::uint64_t expected_end = 0;
    for (const json& entry : header.at("tensors")) {
        if (!entry.is_object() || !entry.contains("name") || !entry.contains("rank") ||
            !entry.contains("extents") || !entry.contains("offset") ||
            !entry.at("name").is_string() || !entry.at("rank").is_number_integer() ||
            !entry.at("extents").is_array() || !entry.at("offset").is_number_unsigned()) {
            format_fail(origin, 12, "malformed tensor directory entry");
        }
        const std::string name = entry.at("name").get<std::string>();
        const int rank = entry.at("rank").get<int>();
        const json& extents = entry.at("extents");
        if (rank < 1 || rank > 4 || static_cast<int>(extents.size()) != rank) {
            format_fail(origin, 12, "tensor '" + name + "' has invalid rank/extents");
        }
        std::vector<int> dim_values;
        std::int64_t count = 1;
        for (const json& d : extents) {
            if (!d.is_number_integer() || d.get<std::int64_t>() < 1 ||
                d.get<std::int64_t>() > kMaxTensorElems) {
                format_fail(origin, 12, "tensor '" + name + "' has invalid extent");
            }
            dim_values.push_back(d.get<int>());
            count *= d.get<std::int64_t>();
        }
        if (count > kMaxTensorElems) {
            format_fail(origin, 12, "tensor '" + name + "' is implausibly large");
        }
        const std::uint64_t off = entry.at("offset").get<std::uint64_t>();
        if (off != expected_end) {
            format_fail(origin, payload_start + off,
                        "tensor '" + name + "' offset breaks payload contiguity");
        }
        const std::uint64_t bytes_needed = static_cast<std::uint64_t>(count) * 4;
        if (off + bytes_needed > payload_size) {
            format_fail(origin, bytes.size(),
                        "truncated payload for tensor '" + name + "' (needs " +
                            std::to_string(bytes_needed) + " bytes at offset " +
                            std::to_string(off) + ")");
        }
        expected_end = off + bytes_needed;

        Shape shape;
        switch (rank) {
            case 1: shape = Shape{dim_values[0]}; break;
            case 2: shape = Shape{dim_values[0], dim_values[1]}; break;
            case 3: shape = Shape{dim_values[0], dim_values[1], dim_values[2]}; break;
            default:
                shape = Shape{dim_values[0], dim_values[1], dim_values[2], dim_values[3]};
        }
        Tensor<float> value(shape);
        for (std::int64_t i = 0; i < count; ++i) {
            value[i] = std::bit_cast<float>(
                get_u32_le(bytes, payload_start + off + static_cast<std::size_t>(i) * 4));
        }
        if (checkpoint.has(name)) {
            format_fail(origin, 12, "duplicate tensor name '" + name + "'");
        }
        checkpoint.tensors.push_back(CheckpointTensor{name, std::move(value)});
    }
    if (expected_end != payload_size) {
        format_fail(origin, payload_start + expected_end,
                    "trailing bytes after the last tensor payload");
    }
    return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Checkpoint checkpoint = decode_checkpoint(read_file(path), path.string());
    if (checkpoint.hash_mismatch) {
        std::fprintf(stderr,
                     "warning: %s: config_hash %s does not match the embedded config "
                     "(expected %s); the config may have been edited after saving\n",
                     path.string().c_str(), checkpoint.config_hash.c_str(),
                     config_hash_hex(checkpoint.config).c_str());
    }
    return checkpoint;
}

} // namespace ssgan
