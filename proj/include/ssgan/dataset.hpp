#pragma once

// Dataset directory handling, labeled-fraction splits, and tile batch
// sampling. Layout on disk:
//   <dir>/images/<id>.<channel>.msr   channel in {red_660nm, nir_790nm, ndvi}
//   <dir>/masks/<id>.pgm
//   <dir>/split.json                  keys: labeled_train, unlabeled_train,
//                                     test, labeled_fraction, seed

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ssgan/classes.hpp"
#include "ssgan/image.hpp"
#include "ssgan/prng.hpp"
#include "ssgan/tensor.hpp"

namespace ssgan {

struct DatasetSplit {
    std::vector<std::string> labeled_train;
    std::vector<std::string> unlabeled_train;
    std::vector<std::string> test;
    double labeled_fraction = 0.0;
    std::uint64_t seed = 0;
};

// Deterministic shuffle by the prng, test ids carved first, then
// |labeled| = max(1, round-half-up(labeled_fraction * remaining)). Needs at
// least 3 ids; the caller records the seed it built the prng from.
DatasetSplit make_split(std::vector<std::string> ids, double labeled_fraction,
                        double test_fraction, Prng& prng);

void save_split(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit load_split(const std::filesystem::path& path);

// All images under <dir>/images, normalized at load, with masks where
// present. Ids are sorted, so directory enumeration order does not matter.
class Dataset {
public:
    struct Entry {
        MultispectralImage image; // normalized
        std::optional<LabelMask> mask;
    };

    static Dataset load_dir(const std::filesystem::path& dir);

    // In-memory construction (synthesis, tests). Images must be un-normalized.
    void add(MultispectralImage image, std::optional<LabelMask> mask);

    std::vector<std::string> ids() const;
    const Entry& entry(const std::string& id) const;
    bool has(const std::string& id) const { return entries_.count(id) != 0; }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, Entry> entries_;
};

enum class Pool { Labeled, Unlabeled, Test };

const char* pool_name(Pool pool);
const std::vector<std::string>& pool_ids(const DatasetSplit& split, Pool pool);

struct Batch {
    Tensor<float> images;           // (B, C, tile_h, tile_w)
    std::optional<MaskBatch> masks; // labeled/test pools only
};

// Uniform random image choice and top-left tile offset per batch element.
// Draw order per element: image index, row offset, column offset.
Batch sample_batch(const Dataset& dataset, const DatasetSplit& split, Pool pool,
                   ChannelSelection selection, int batch_size, int tile_h, int tile_w,
                   Prng& prng);

} // namespace ssgan
