#pragma once

// File formats:
//   .msr raster: magic "MSR1" | height u32 LE | width u32 LE | h*w f32 LE,
//                row-major.
//   mask:        binary PGM "P5", maxval 255, values restricted to {0,1,2,255}.
// Loaders fail with a FormatError naming the byte offset of the problem;
// round-trips are bitwise exact.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ssgan/image.hpp"

namespace ssgan {

void save_raster(const std::filesystem::path& path, const Raster& raster);
Raster load_raster(const std::filesystem::path& path);

void save_mask(const std::filesystem::path& path, const LabelMask& mask);
LabelMask load_mask(const std::filesystem::path& path);

// Unrestricted 8-bit PGM writer for confidence maps and generated samples.
void save_gray_pgm(const std::filesystem::path& path, int height, int width,
                   const std::vector<std::uint8_t>& values);

// In-memory codecs behind the file functions; the corruption fuzz tests bit
// patterns without touching the filesystem.
std::vector<std::uint8_t> encode_raster(const Raster& raster);
Raster decode_raster(const std::vector<std::uint8_t>& bytes, const std::string& origin);
std::vector<std::uint8_t> encode_mask(const LabelMask& mask);
LabelMask decode_mask(const std::vector<std::uint8_t>& bytes, const std::string& origin);

} // namespace ssgan
