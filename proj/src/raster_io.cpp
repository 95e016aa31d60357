#include "ssgan/raster_io.hpp"

#include <bit>
#include <cctype>
#include <limits>

#include "ssgan/byte_io.hpp"
#include "ssgan/errors.hpp"

namespace ssgan {

namespace {

constexpr char kMsrMagic[4] = {'M', 'S', 'R', '1'};
constexpr std::int64_t kMaxExtent = 1 << 20;

} // namespace

std::vector<std::uint8_t> encode_raster(const Raster& raster) {
    if (raster.shape().rank() != 2) {
        throw ShapeError("raster must be rank 2, got " + raster.shape().str());
    }
    const std::uint32_t h = static_cast<std::uint32_t>(raster.shape().dim(0));
    const std::uint32_t w = static_cast<std::uint32_t>(raster.shape().dim(1));
    std::vector<std::uint8_t> out;
    out.reserve(12 + static_cast<std::size_t>(h) * w * 4);
    for (char c : kMsrMagic) out.push_back(static_cast<std::uint8_t>(c));
    put_u32_le(out, h);
    put_u32_le(out, w);
    for (std::int64_t i = 0; i < raster.size(); ++i) {
        put_u32_le(out, std::bit_cast<std::uint32_t>(raster[i]));
    }
    return out;
}

Raster decode_raster(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    if (bytes.size() < 4) format_fail(origin, bytes.size(), "truncated magic");
    for (std::size_t i = 0; i < 4; ++i) {
        if (bytes[i] != static_cast<std::uint8_t>(kMsrMagic[i])) {
            format_fail(origin, i, "bad magic (expected \"MSR1\")");
        }
    }
    if (bytes.size() < 12) format_fail(origin, bytes.size(), "truncated extents header");
    const std::uint32_t h = get_u32_le(bytes, 4);
    const std::uint32_t w = get_u32_le(bytes, 8);
    if (h == 0 || h > kMaxExtent) format_fail(origin, 4, "height " + std::to_string(h) + " out of range");
    if (w == 0 || w > kMaxExtent) format_fail(origin, 8, "width " + std::to_string(w) + " out of range");
    const std::size_t expected = 12 + static_cast<std::size_t>(h) * w * 4;
    if (bytes.size() < expected) {
        format_fail(origin, bytes.size(),
                    "truncated payload (expected " + std::to_string(expected) + " bytes)");
    }
    if (bytes.size() > expected) {
        format_fail(origin, expected, "trailing bytes after payload");
    }
    Raster raster(Shape{static_cast<int>(h), static_cast<int>(w)});
    for (std::int64_t i = 0; i < raster.size(); ++i) {
        raster[i] = std::bit_cast<float>(get_u32_le(bytes, 12 + static_cast<std::size_t>(i) * 4));
    }
    return raster;
}

void save_raster(const std::filesystem::path& path, const Raster& raster) {
    write_file(path, encode_raster(raster));
}

Raster load_raster(const std::filesystem::path& path) {
    return decode_raster(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// PGM. Header tokens are separated by whitespace; '#' starts a comment line.

namespace {

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::size_t payload_offset = 0;
};

bool is_pgm_space(std::uint8_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::size_t skip_pgm_space(const std::vector<std::uint8_t>& bytes, std::size_t pos,
                           const std::string& origin) {
    while (pos < bytes.size()) {
        if (is_pgm_space(bytes[pos])) {
            ++pos;
        } else if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else {
            return pos;
        }
    }
    format_fail(origin, pos, "truncated header");
}

int parse_pgm_int(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
                  const std::string& origin) {
    const std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
        value = value * 10 + (bytes[pos] - '0');
        if (value > kMaxExtent * 4) format_fail(origin, start, "numeric field out of range");
        ++pos;
    }
    if (pos == start) format_fail(origin, pos, "expected a decimal value");
    return static_cast<int>(value);
}

PgmHeader parse_pgm_header(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    if (bytes.size() < 2) format_fail(origin, bytes.size(), "truncated magic");
    if (bytes[0] != 'P' || bytes[1] != '5') format_fail(origin, 0, "bad magic (expected \"P5\")");
    PgmHeader header;
    std::size_t pos = 2;
    pos = skip_pgm_space(bytes, pos, origin);
    header.width = parse_pgm_int(bytes, pos, origin);
    pos = skip_pgm_space(bytes, pos, origin);
    header.height = parse_pgm_int(bytes, pos, origin);
    pos = skip_pgm_space(bytes, pos, origin);
    const std::size_t maxval_at = pos;
    header.maxval = parse_pgm_int(bytes, pos, origin);
    if (header.maxval != 255) format_fail(origin, maxval_at, "maxval must be 255");
    if (pos >= bytes.size() || !is_pgm_space(bytes[pos])) {
        format_fail(origin, pos, "expected whitespace before payload");
    }
    header.payload_offset = pos + 1;
    if (header.width <= 0 || header.width > kMaxExtent) {
        format_fail(origin, 2, "width out of range");
    }
    if (header.height <= 0 || header.height > kMaxExtent) {
        format_fail(origin, 2, "height out of range");
    }
    return header;
}

std::vector<std::uint8_t> encode_pgm(int height, int width,
                                     const std::vector<std::uint8_t>& values) {
    const std::string header =
        "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), values.begin(), values.end());
    return out;
}

} // namespace

std::vector<std::uint8_t> encode_mask(const LabelMask& mask) {
    mask.validate();
    return encode_pgm(mask.height, mask.width, mask.values);
}

LabelMask decode_mask(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    const PgmHeader header = parse_pgm_header(bytes, origin);
    const std::size_t count = static_cast<std::size_t>(header.width) * header.height;
    if (bytes.size() < header.payload_offset + count) {
        format_fail(origin, bytes.size(), "truncated payload (expected " +
                                              std::to_string(header.payload_offset + count) +
                                              " bytes)");
    }
    if (bytes.size() > header.payload_offset + count) {
        format_fail(origin, header.payload_offset + count, "trailing bytes after payload");
    }
    LabelMask mask;
    mask.width = header.width;
    mask.height = header.height;
    mask.values.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header.payload_offset),
                       bytes.end());
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
        if (!valid_mask_value(mask.values[i])) {
            format_fail(origin, header.payload_offset + i,
                        "mask value " + std::to_string(int(mask.values[i])) +
                            " outside {0,1,2,255}");
        }
    }
    return mask;
}

void save_mask(const std::filesystem::path& path, const LabelMask& mask) {
    write_file(path, encode_mask(mask));
}

LabelMask load_mask(const std::filesystem::path& path) {
    LabelMask mask = decode_mask(read_file(path), path.string());
    mask.id = path.stem().string();
    return mask;
}

void save_gray_pgm(const std::filesystem::path& path, int height, int width,
                   const std::vector<std::uint8_t>& values) {
    if (values.size() != static_cast<std::size_t>(height) * width) {
        throw ShapeError("gray pgm value count does not match extents");
    }
    write_file(path, encode_pgm(height, width, values));
}

} // namespace ssgan
