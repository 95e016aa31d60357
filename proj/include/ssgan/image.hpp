#pragma once

// Multispectral image domain types: named reflectance rasters, label masks,
// NDVI derivation, [-1,1] normalization, and channel selection.

#include <map>
#include <string>
#include <vector>

#include "ssgan/classes.hpp"
#include "ssgan/tensor.hpp"

namespace ssgan {

// A single-band raster, rank-2 (height, width), 32-bit.
using Raster = Tensor<float>;

inline constexpr const char* kChannelRed = "red_660nm";
inline constexpr const char* kChannelNir = "nir_790nm";
inline constexpr const char* kChannelNdvi = "ndvi";

struct MultispectralImage {
    std::string id;
    int width = 0;
    int height = 0;
    std::map<std::string, Raster> channels; // keys among {red_660nm, nir_790nm, ndvi}
    bool normalized = false;                // true once values are mapped to [-1,1]

    bool has_channel(const std::string& name) const { return channels.count(name) != 0; }
    const Raster& channel(const std::string& name) const;
    void set_channel(const std::string& name, Raster raster);
    void validate() const;
};

struct LabelMask {
    std::string id;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values; // row-major; {0,1,2,255}

    std::uint8_t at(int row, int col) const {
        return values[static_cast<std::size_t>(row) * width + col];
    }
    void validate() const;
};

// (NIR - Red) / (NIR + Red + 1e-8) on un-normalized reflectance; output in
// (-1, 1), 0 at the all-zero degenerate case.
Raster compute_ndvi(const Raster& nir, const Raster& red);

// Maps red/nir by v -> 2v-1; ndvi is already index-valued and is untouched.
MultispectralImage normalize_channels(MultispectralImage image);

// The five channel selections of the experiment grid, in canonical row order.
enum class ChannelSelection { Red, Nir, Ndvi, RedNir, RedNirNdvi };

inline constexpr ChannelSelection kAllSelections[] = {
    ChannelSelection::Red, ChannelSelection::Nir, ChannelSelection::Ndvi,
    ChannelSelection::RedNir, ChannelSelection::RedNirNdvi};

const char* selection_name(ChannelSelection sel);
ChannelSelection parse_selection(const std::string& name); // exact names; lists choices on error
std::vector<std::string> selection_channels(ChannelSelection sel); // fixed red, nir, ndvi order
int selection_channel_count(ChannelSelection sel);

// Stacks the selected channels into a (1, C, H, W) tensor. Requires the image
// to be normalized and every selected channel present.
Tensor<float> select_channels(const MultispectralImage& image, ChannelSelection sel);

} // namespace ssgan
