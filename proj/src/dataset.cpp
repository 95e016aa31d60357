#include "ssgan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

#include "ssgan/errors.hpp"
#include "ssgan/raster_io.hpp"

namespace ssgan {

namespace {

using nlohmann::json;

std::vector<std::string> ids_from_json(const json& j, const std::string& key,
                                       const std::string& origin) {
    if (!j.contains(key)) {
        throw FormatError(origin + ": missing key '" + key + "'");
    }
    const json& arr = j.at(key);
    if (!arr.is_array()) {
        throw FormatError(origin + ": '" + key + "' must be an array of ids");
    }
    std::vector<std::string> out;
    out.reserve(arr.size());
    for (const json& v : arr) {
        if (!v.is_string()) {
            throw FormatError(origin + ": '" + key + "' must contain only strings");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

void check_disjoint(const DatasetSplit& split, const std::string& origin) {
    std::set<std::string> seen;
    auto take = [&](const std::vector<std::string>& ids, const char* pool) {
        for (const std::string& id : ids) {
            if (!seen.insert(id).second) {
                throw FormatError(origin + ": id '" + id + "' appears twice across pools (" +
                                  pool + ")");
            }
        }
    };
    take(split.labeled_train, "labeled_train");
    take(split.unlabeled_train, "unlabeled_train");
    take(split.test, "test");
}

} // namespace

DatasetSplit make_split(std::vector<std::string> ids, double labeled_fraction,
                        double test_fraction, Prng& prng) {
    if (ids.size() < 3) {
        throw ConfigError("make_split needs at least 3 image ids, got " +
                          std::to_string(ids.size()));
    }
    if (!(labeled_fraction > 0.0) || labeled_fraction > 1.0) {
        throw ConfigError("labeled_fraction must be in (0, 1], got " +
                          std::to_string(labeled_fraction));
    }
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
        throw ConfigError("test_fraction must be in (0, 1), got " +
                          std::to_string(test_fraction));
    }
    const auto n = static_cast<std::int64_t>(ids.size());
    for (std::int64_t i = n - 1; i > 0; --i) {
        std::int64_t j = prng.next_index(i + 1);
        std::swap(ids[i], ids[j]);
    }
    auto round_count = [](double fraction, std::int64_t total) {
        return static_cast<std::int64_t>(std::floor(fraction * static_cast<double>(total) + 0.5));
    };
    std::int64_t n_test = round_count(test_fraction, n);
    if (n_test >= n) {
        throw ConfigError("test_fraction " + std::to_string(test_fraction) +
                          " leaves no training images out of " + std::to_string(n));
    }
    std::int64_t n_train = n - n_test;
    std::int64_t n_labeled = std::max<std::int64_t>(1, round_count(labeled_fraction, n_train));
    n_labeled = std::min(n_labeled, n_train);

    DatasetSplit split;
    split.labeled_fraction = labeled_fraction;
    split.labeled_train.assign(ids.begin(), ids.begin() + n_labeled);
    split.unlabeled_train.assign(ids.begin() + n_labeled, ids.begin() + n_train);
    split.test.assign(ids.begin() + n_train, ids.end());
    return split;
}

void save_split(const std::filesystem::path& path, const DatasetSplit& split) {
    json j;
    j["labeled_train"] = split.labeled_train;
    j["unlabeled_train"] = split.unlabeled_train;
    j["test"] = split.test;
    j["labeled_fraction"] = split.labeled_fraction;
    j["seed"] = split.seed;
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
    if (!out.flush()) {
        throw FormatError("failed writing " + path.string());
    }
}

DatasetSplit load_split(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open split file " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (!j.is_object()) {
        throw FormatError(path.string() + ": split file must hold a JSON object");
    }
    static const std::set<std::string> known = {"labeled_train", "unlabeled_train", "test",
                                                "labeled_fraction", "seed"};
    for (const auto& item : j.items()) {
        if (known.count(item.key()) == 0) {
            throw FormatError(path.string() + ": unknown key '" + item.key() + "'");
        }
    }
    DatasetSplit split;
    const std::string origin = path.string();
    split.labeled_train = ids_from_json(j, "labeled_train", origin);
    split.unlabeled_train = ids_from_json(j, "unlabeled_train", origin);
    split.test = ids_from_json(j, "test", origin);
    if (!j.contains("labeled_fraction") || !j.at("labeled_fraction").is_number()) {
        throw FormatError(origin + ": missing numeric 'labeled_fraction'");
    }
    split.labeled_fraction = j.at("labeled_fraction").get<double>();
    if (!j.contains("seed") || !j.at("seed").is_number_unsigned()) {
        throw FormatError(origin + ": missing unsigned 'seed'");
    }
    split.seed = j.at("seed").get<std::uint64_t>();
    if (split.labeled_train.empty()) {
        throw FormatError(origin + ": labeled_train must not be empty");
    }
    check_disjoint(split, origin);
    return split;
}

Dataset Dataset::load_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::path images_dir = dir / "images";
    if (!fs::is_directory(images_dir)) {
        throw DataError("no images directory at " + images_dir.string());
    }
    // Group channel rasters by image id: <id>.<channel>.msr.
    std::map<std::string, MultispectralImage> staged;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".msr") continue;
        std::string stem = entry.path().stem().string(); // "<id>.<channel>"
        auto dot = stem.rfind('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == stem.size()) {
            throw DataError("raster file name must be <id>.<channel>.msr: " +
                            entry.path().string());
        }
        std::string id = stem.substr(0, dot);
        std::string channel = stem.substr(dot + 1);
        if (channel != kChannelRed && channel != kChannelNir && channel != kChannelNdvi) {
            throw DataError("unknown channel '" + channel + "' in " + entry.path().string());
        }
        MultispectralImage& image = staged[id];
        image.id = id;
        image.set_channel(channel, load_raster(entry.path()));
    }
    if (staged.empty()) {
        throw DataError("no .msr rasters under " + images_dir.string());
    }

    fs::path masks_dir = dir / "masks";
    Dataset dataset;
    for (auto& [id, image] : staged) {
        std::optional<LabelMask> mask;
        fs::path mask_path = masks_dir / (id + ".pgm");
        if (fs::is_regular_file(mask_path)) {
            mask = load_mask(mask_path);
        }
        dataset.add(std::move(image), std::move(mask));
    }
    return dataset;
}

void Dataset::add(MultispectralImage image, std::optional<LabelMask> mask) {
    image.validate();
    if (!image.normalized) {
        image = normalize_channels(std::move(image));
    }
    if (mask) {
        mask->validate();
        if (mask->width != image.width || mask->height != image.height) {
            throw ShapeError("mask for '" + image.id + "' is " + std::to_string(mask->width) +
                             "x" + std::to_string(mask->height) + " but the image is " +
                             std::to_string(image.width) + "x" + std::to_string(image.height));
        }
    }
    std::string id = image.id;
    if (id.empty()) {
        throw DataError("image id must not be empty");
    }
    if (!entries_.emplace(id, Entry{std::move(image), std::move(mask)}).second) {
        throw DataError("duplicate image id '" + id + "'");
    }
}

std::vector<std::string> Dataset::ids() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [id, entry] : entries_) out.push_back(id);
    return out;
}

const Dataset::Entry& Dataset::entry(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) {
        throw DataError("no image with id '" + id + "' in the dataset");
    }
    return it->second;
}

const char* pool_name(Pool pool) {
    switch (pool) {
        case Pool::Labeled: return "labeled_train";
        case Pool::Unlabeled: return "unlabeled_train";
        case Pool::Test: return "test";
    }
    return "?";
}

const std::vector<std::string>& pool_ids(const DatasetSplit& split, Pool pool) {
    switch (pool) {
        case Pool::Labeled: return split.labeled_train;
        case Pool::Unlabeled: return split.unlabeled_train;
        case Pool::Test: return split.test;
    }
    throw ContractError("unknown pool");
}

Batch sample_batch(const Dataset& dataset, const DatasetSplit& split, Pool pool,
                   ChannelSelection selection, int batch_size, int tile_h, int tile_w,
                   Prng& prng) {
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
    }
    if (tile_h < 1 || tile_w < 1) {
        throw ConfigError("tile extents must be >= 1");
    }
    const std::vector<std::string>& ids = pool_ids(split, pool);
    if (ids.empty()) {
        throw DataError(std::string("pool '") + pool_name(pool) + "' has no images");
    }
    const bool with_masks = pool != Pool::Unlabeled;
    const std::vector<std::string> channel_names = selection_channels(selection);

    // Fail deterministically before consuming any randomness.
    for (const std::string& id : ids) {
        const Dataset::Entry& entry = dataset.entry(id);
        if (!entry.image.normalized) {
            throw ContractError("image '" + id + "' was not normalized before sampling");
        }
        if (entry.image.height < tile_h || entry.image.width < tile_w) {
            throw ConfigError("tile " + std::to_string(tile_h) + "x" + std::to_string(tile_w) +
                              " does not fit image '" + id + "' (" +
                              std::to_string(entry.image.height) + "x" +
                              std::to_string(entry.image.width) + ")");
        }
        for (const std::string& name : channel_names) {
            if (!entry.image.has_channel(name)) {
                throw DataError("image '" + id + "' is missing channel '" + name + "'");
            }
        }
        if (with_masks && !entry.mask) {
            throw DataError("image '" + id + "' has no label mask but pool '" +
                            pool_name(pool) + "' requires one");
        }
    }

    const int channels = static_cast<int>(channel_names.size());
    Batch batch;
    batch.images = Tensor<float>(Shape{batch_size, channels, tile_h, tile_w});
    if (with_masks) batch.masks = MaskBatch(batch_size, tile_h, tile_w);

    for (int b = 0; b < batch_size; ++b) {
        const std::string& id = ids[prng.next_index(static_cast<std::int64_t>(ids.size()))];
        const Dataset::Entry& entry = dataset.entry(id);
        const int row = static_cast<int>(prng.next_index(entry.image.height - tile_h + 1));
        const int col = static_cast<int>(prng.next_index(entry.image.width - tile_w + 1));
        for (int c = 0; c < channels; ++c) {
            const Raster& raster = entry.image.channel(channel_names[c]);
            for (int y = 0; y < tile_h; ++y) {
                const float* src = raster.data() + raster.offset(0, 0, row + y, col);
                float* dst = batch.images.data() + batch.images.offset(b, c, y, 0);
                std::copy_n(src, tile_w, dst);
            }
        }
        if (with_masks) {
            for (int y = 0; y < tile_h; ++y) {
                for (int x = 0; x < tile_w; ++x) {
                    batch.masks->at(b, y, x) = entry.mask->at(row + y, col + x);
                }
            }
        }
    }
    return batch;
}

} // namespace ssgan
