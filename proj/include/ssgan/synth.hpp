#pragma once

// Synthetic crop-field generator: soil background, periodic crop rows, weed
// disks. Supplies a desk-scale dataset with exact ground truth; reflectance
// statistics are chosen so NDVI separates vegetation from soil.

#include <filesystem>
#include <string>
#include <utility>

#include "json.hpp"

#include "ssgan/dataset.hpp"
#include "ssgan/image.hpp"
#include "ssgan/prng.hpp"

namespace ssgan {

struct ClassReflectance {
    double red_mean = 0.0;
    double red_stddev = 0.0;
    double nir_mean = 0.0;
    double nir_stddev = 0.0;
};

struct SyntheticFieldConfig {
    int width = 128;
    int height = 128;
    int crop_row_spacing = 16; // stripe period across the width, pixels
    int crop_row_width = 6;    // stripe thickness, pixels
    int weed_blob_count = 14;
    int weed_radius_min = 5;
    int weed_radius_max = 10;
    ClassReflectance soil{0.40, 0.03, 0.25, 0.03};
    ClassReflectance crop{0.15, 0.03, 0.70, 0.03};
    ClassReflectance weed{0.22, 0.03, 0.50, 0.03};
    double sensor_noise_stddev = 0.02;
    std::uint64_t seed = 0;

    // Dataset-level knobs used by write_synth_dataset.
    int image_count = 60;
    double labeled_fraction = 0.3;
    double test_fraction = 0.2;

    // Vegetation must beat soil in NIR and undercut it in red, rows must fit
    // their spacing, extents/radii/counts must be positive and ordered.
    void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticFieldConfig& config);
// Rejects unknown keys; missing keys keep their defaults.
SyntheticFieldConfig synth_config_from_json(const nlohmann::json& j, const std::string& origin);

// One field image plus its exact mask. Geometry first, then reflectance.
// Draw order (the contract replayed by the recount oracle):
//   1. stripe phase: next_index(crop_row_spacing)
//   2. per weed blob: center x = next_index(width), center y = next_index(height),
//      radius = weed_radius_min + next_index(weed_radius_max - weed_radius_min + 1)
//   3. per pixel, row-major: red class draw, red sensor draw, nir class draw,
//      nir sensor draw (all normal), each channel clamped to [0, 1]
// Crop stripes run along the height at columns (x + phase) % spacing < width;
// weed disks are painted over them. NDVI is derived from the clamped bands.
std::pair<MultispectralImage, LabelMask> synth_field(const SyntheticFieldConfig& config,
                                                     Prng& prng);

// Writes images/<id>.<channel>.msr, masks/<id>.pgm and split.json under dir.
// Ids are field_000.. ; per-image streams come from split(1).split(i), the
// dataset split from split(2), so the tree is a pure function of config.seed.
// Refuses an existing non-empty dir unless force is set.
void write_synth_dataset(const std::filesystem::path& dir, const SyntheticFieldConfig& config,
                         bool force);

} // namespace ssgan
