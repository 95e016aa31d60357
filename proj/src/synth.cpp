#include "ssgan/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <vector>

#include "ssgan/errors.hpp"
#include "ssgan/raster_io.hpp"

namespace ssgan {

namespace {

using nlohmann::json;

void check_reflectance(const ClassReflectance& r, const char* name) {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(r.red_mean) || !in_unit(r.nir_mean)) {
        throw ConfigError(std::string(name) + " reflectance means must lie in [0, 1]");
    }
    if (r.red_stddev < 0.0 || r.nir_stddev < 0.0) {
        throw ConfigError(std::string(name) + " reflectance stddevs must be >= 0");
    }
}

json reflectance_to_json(const ClassReflectance& r) {
    return json{{"red_mean", r.red_mean},
                {"red_stddev", r.red_stddev},
                {"nir_mean", r.nir_mean},
                {"nir_stddev", r.nir_stddev}};
}

ClassReflectance reflectance_from_json(const json& j, const std::string& origin,
                                       const char* name) {
    if (!j.is_object()) {
        throw FormatError(origin + ": '" + name + "' must be an object");
    }
    static const std::set<std::string> known = {"red_mean", "red_stddev", "nir_mean",
                                                "nir_stddev"};
    ClassReflectance r;
    for (const auto& item : j.items()) {
        if (known.count(item.key()) == 0) {
            throw FormatError(origin + ": unknown key '" + std::string(name) + "." +
                              item.key() + "'");
        }
        if (!item.value().is_number()) {
            throw FormatError(origin + ": '" + std::string(name) + "." + item.key() +
                              "' must be a number");
        }
    }
    if (j.contains("red_mean")) r.red_mean = j.at("red_mean").get<double>();
    if (j.contains("red_stddev")) r.red_stddev = j.at("red_stddev").get<double>();
    if (j.contains("nir_mean")) r.nir_mean = j.at("nir_mean").get<double>();
    if (j.contains("nir_stddev")) r.nir_stddev = j.at("nir_stddev").get<double>();
    return r;
}

} // namespace

void SyntheticFieldConfig::validate() const {
    if (width < 1 || height < 1) {
        throw ConfigError("field extents must be positive");
    }
    if (crop_row_spacing < 1) {
        throw ConfigError("crop_row_spacing must be >= 1");
    }
    if (crop_row_width < 1 || crop_row_width >= crop_row_spacing) {
        throw ConfigError("crop_row_width must be in [1, crop_row_spacing), got width " +
                          std::to_string(crop_row_width) + " against spacing " +
                          std::to_string(crop_row_spacing));
    }
    if (weed_blob_count < 0) {
        throw ConfigError("weed_blob_count must be >= 0");
    }
    if (weed_radius_min < 1 || weed_radius_max < weed_radius_min) {
        throw ConfigError("weed radius range must satisfy 1 <= min <= max");
    }
    check_reflectance(soil, "soil");
    check_reflectance(crop, "crop");
    check_reflectance(weed, "weed");
    if (!(crop.nir_mean > soil.nir_mean) || !(weed.nir_mean > soil.nir_mean)) {
        throw ConfigError("vegetation NIR means must exceed the soil NIR mean");
    }
    if (!(crop.red_mean < soil.red_mean) || !(weed.red_mean < soil.red_mean)) {
        throw ConfigError("vegetation red means must be below the soil red mean");
    }
    if (sensor_noise_stddev < 0.0) {
        throw ConfigError("sensor_noise_stddev must be >= 0");
    }
    if (image_count < 3) {
        throw ConfigError("image_count must be >= 3 to allow a train/test split");
    }
    if (!(labeled_fraction > 0.0) || labeled_fraction > 1.0) {
        throw ConfigError("labeled_fraction must be in (0, 1]");
    }
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
        throw ConfigError("test_fraction must be in (0, 1)");
    }
}

void to_json(json& j, const SyntheticFieldConfig& config) {
    j = json{{"width", config.width},
             {"height", config.height},
             {"crop_row_spacing", config.crop_row_spacing},
             {"crop_row_width", config.crop_row_width},
             {"weed_blob_count", config.weed_blob_count},
             {"weed_radius_min", config.weed_radius_min},
             {"weed_radius_max", config.weed_radius_max},
             {"soil", reflectance_to_json(config.soil)},
             {"crop", reflectance_to_json(config.crop)},
             {"weed", reflectance_to_json(config.weed)},
             {"sensor_noise_stddev", config.sensor_noise_stddev},
             {"seed", config.seed},
             {"image_count", config.image_count},
             {"labeled_fraction", config.labeled_fraction},
             {"test_fraction", config.test_fraction}};
}

SyntheticFieldConfig synth_config_from_json(const json& j, const std::string& origin) {
    if (!j.is_object()) {
        throw FormatError(origin + ": synth config must be a JSON object");
    }
    static const std::set<std::string> known = {
        "width",           "height",        "crop_row_spacing",    "crop_row_width",
        "weed_blob_count", "weed_radius_min", "weed_radius_max",   "soil",
        "crop",            "weed",          "sensor_noise_stddev", "seed",
        "image_count",     "labeled_fraction", "test_fraction"};
    for (const auto& item : j.items()) {
        if (known.count(item.key()) == 0) {
            throw FormatError(origin + ": unknown key '" + item.key() + "'");
        }
    }
    SyntheticFieldConfig config;
    auto get_int = [&](const char* key, int& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number_integer()) {
            throw FormatError(origin + ": '" + key + "' must be an integer");
        }
        out = j.at(key).get<int>();
    };
    auto get_double = [&](const char* key, double& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number()) {
            throw FormatError(origin + ": '" + key + "' must be a number");
        }
        out = j.at(key).get<double>();
    };
    get_int("width", config.width);
    get_int("height", config.height);
    get_int("crop_row_spacing", config.crop_row_spacing);
    get_int("crop_row_width", config.crop_row_width);
    get_int("weed_blob_count", config.weed_blob_count);
    get_int("weed_radius_min", config.weed_radius_min);
    get_int("weed_radius_max", config.weed_radius_max);
    if (j.contains("soil")) config.soil = reflectance_from_json(j.at("soil"), origin, "soil");
    if (j.contains("crop")) config.crop = reflectance_from_json(j.at("crop"), origin, "crop");
    if (j.contains("weed")) config.weed = reflectance_from_json(j.at("weed"), origin, "weed");
    get_double("sensor_noise_stddev", config.sensor_noise_stddev);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) {
            throw FormatError(origin + ": 'seed' must be an unsigned integer");
        }
        config.seed = j.at("seed").get<std::uint64_t>();
    }
    get_int("image_count", config.image_count);
    get_double("labeled_fraction", config.labeled_fraction);
    get_double("test_fraction", config.test_fraction);
    return config;
}

std::pair<MultispectralImage, LabelMask> synth_field(const SyntheticFieldConfig& config,
                                                     Prng& prng) {
    config.validate();
    const int w = config.width;
    const int h = config.height;

    const int phase = static_cast<int>(prng.next_index(config.crop_row_spacing));

    struct Blob {
        int cx, cy, r;
    };
    std::vector<Blob> blobs;
    blobs.reserve(static_cast<std::size_t>(config.weed_blob_count));
    for (int b = 0; b < config.weed_blob_count; ++b) {
        Blob blob;
        blob.cx = static_cast<int>(prng.next_index(w));
        blob.cy = static_cast<int>(prng.next_index(h));
        blob.r = config.weed_radius_min +
                 static_cast<int>(prng.next_index(config.weed_radius_max -
                                                  config.weed_radius_min + 1));
        blobs.push_back(blob);
    }

    LabelMask mask;
    mask.width = w;
    mask.height = h;
    mask.values.assign(static_cast<std::size_t>(w) * h, kClassBackground);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if ((x + phase) % config.crop_row_spacing < config.crop_row_width) {
                mask.values[static_cast<std::size_t>(y) * w + x] = kClassCrop;
            }
        }
    }
    for (const Blob& blob : blobs) {
        const int y0 = std::max(0, blob.cy - blob.r);
        const int y1 = std::min(h - 1, blob.cy + blob.r);
        const int x0 = std::max(0, blob.cx - blob.r);
        const int x1 = std::min(w - 1, blob.cx + blob.r);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const int dx = x - blob.cx;
                const int dy = y - blob.cy;
                if (dx * dx + dy * dy <= blob.r * blob.r) {
                    mask.values[static_cast<std::size_t>(y) * w + x] = kClassWeed;
                }
            }
        }
    }

    Raster red(Shape{h, w});
    Raster nir(Shape{h, w});
    auto clamp_unit = [](double v) {
        return static_cast<float>(std::clamp(v, 0.0, 1.0));
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const ClassReflectance& cls = mask.values[i] == kClassCrop   ? config.crop
                                          : mask.values[i] == kClassWeed ? config.weed
                                                                         : config.soil;
            double r = prng.normal(cls.red_mean, cls.red_stddev) +
                       prng.normal(0.0, config.sensor_noise_stddev);
            double n = prng.normal(cls.nir_mean, cls.nir_stddev) +
                       prng.normal(0.0, config.sensor_noise_stddev);
            red[static_cast<std::int64_t>(i)] = clamp_unit(r);
            nir[static_cast<std::int64_t>(i)] = clamp_unit(n);
        }
    }

    MultispectralImage image;
    image.set_channel(kChannelRed, std::move(red));
    image.set_channel(kChannelNir, std::move(nir));
    image.set_channel(kChannelNdvi,
                      compute_ndvi(image.channel(kChannelNir), image.channel(kChannelRed)));
    image.validate();
    mask.validate();
    return {std::move(image), std::move(mask)};
}

void write_synth_dataset(const std::filesystem::path& dir, const SyntheticFieldConfig& config,
                         bool force) {
    namespace fs = std::filesystem;
    config.validate();
    if (fs::exists(dir) && !fs::is_directory(dir)) {
        throw DataError(dir.string() + " exists and is not a directory");
    }
    if (fs::is_directory(dir) && !fs::is_empty(dir) && !force) {
        throw DataError(dir.string() + " is not empty; pass force to overwrite");
    }
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");

    const Prng root(config.seed);
    const Prng image_root = root.split(1);
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(config.image_count));
    for (int i = 0; i < config.image_count; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "field_%03d", i);
        std::string id(buf);
        ids.push_back(id);

        Prng image_prng = image_root.split(static_cast<std::uint64_t>(i));
        auto [image, mask] = synth_field(config, image_prng);
        image.id = id;
        mask.id = id;
        for (const char* channel : {kChannelRed, kChannelNir, kChannelNdvi}) {
            save_raster(dir / "images" / (id + "." + channel + ".msr"), image.channel(channel));
        }
        save_mask(dir / "masks" / (id + ".pgm"), mask);
    }

    Prng split_prng = root.split(2);
    DatasetSplit split =
        make_split(ids, config.labeled_fraction, config.test_fraction, split_prng);
    split.seed = config.seed;
    save_split(dir / "split.json", split);
}

} // namespace ssgan
