#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ssgan/dataset.hpp"
#include "ssgan/raster_io.hpp"

using namespace ssgan;

namespace {

std::vector<std::string> numbered_ids(int n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("img_" + std::to_string(100 + i));
    return ids;
}

// 16x16 images whose red channel encodes the pixel position and whose nir
// channel encodes the image index, so a sampled tile reveals exactly where it
// came from. Masks hold (r+c)%3 with one ignore pixel at the origin.
Dataset sentinel_dataset(int count, bool with_masks = true) {
    Dataset dataset;
    for (int i = 0; i < count; ++i) {
        MultispectralImage image;
        image.id = "img_" + std::to_string(100 + i);
        Raster red(Shape{16, 16});
        Raster nir(Shape{16, 16});
        for (int r = 0; r < 16; ++r) {
            for (int c = 0; c < 16; ++c) {
                red[r * 16 + c] = static_cast<float>(r * 16 + c) / 255.0f;
                nir[r * 16 + c] = static_cast<float>(i) / 16.0f;
            }
        }
        image.set_channel(kChannelRed, red);
        image.set_channel(kChannelNir, nir);
        std::optional<LabelMask> mask;
        if (with_masks) {
            LabelMask m;
            m.id = image.id;
            m.width = m.height = 16;
            m.values.resize(256);
            for (int r = 0; r < 16; ++r)
                for (int c = 0; c < 16; ++c) m.values[r * 16 + c] = (r + c) % 3;
            m.values[0] = kLabelIgnore;
            mask = m;
        }
        dataset.add(std::move(image), std::move(mask));
    }
    return dataset;
}

DatasetSplit all_labeled(const Dataset& dataset) {
    DatasetSplit split;
    split.labeled_train = dataset.ids();
    split.labeled_fraction = 1.0;
    return split;
}

} // namespace

TEST_CASE("make_split carves the documented pool sizes") {
    Prng prng(5);
    DatasetSplit split = make_split(numbered_ids(12), 0.3, 1.0 / 6.0, prng);
    CHECK(split.test.size() == 2);
    CHECK(split.labeled_train.size() == 3);
    CHECK(split.unlabeled_train.size() == 7);
    CHECK(split.labeled_fraction == 0.3);

    std::set<std::string> all;
    for (const auto* pool : {&split.labeled_train, &split.unlabeled_train, &split.test})
        for (const auto& id : *pool) CHECK(all.insert(id).second);
    const auto ids = numbered_ids(12);
    CHECK(all == std::set<std::string>(ids.begin(), ids.end()));
}

TEST_CASE("make_split is a seed-deterministic disjoint partition") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        Prng p1(seed), p2(seed);
        DatasetSplit a = make_split(numbered_ids(11), 0.5, 0.2, p1);
        DatasetSplit b = make_split(numbered_ids(11), 0.5, 0.2, p2);
        CHECK(a.labeled_train == b.labeled_train);
        CHECK(a.unlabeled_train == b.unlabeled_train);
        CHECK(a.test == b.test);

        // test count rounds half-up, labeled count likewise with a floor of 1
        CHECK(a.test.size() == 2);
        CHECK(a.labeled_train.size() == 5); // round(0.5 * 9) = 5 (half-up)
        CHECK(a.unlabeled_train.size() == 4);

        std::set<std::string> all;
        for (const auto* pool : {&a.labeled_train, &a.unlabeled_train, &a.test})
            for (const auto& id : *pool) CHECK(all.insert(id).second);
        CHECK(all.size() == 11);
    }
}

TEST_CASE("make_split edge cases and rejections") {
    {
        Prng p(1);
        DatasetSplit full = make_split(numbered_ids(10), 1.0, 0.2, p);
        CHECK(full.unlabeled_train.empty());
        CHECK(full.labeled_train.size() == 8);
    }
    {
        Prng p(1); // tiny fraction still labels at least one image
        DatasetSplit tiny = make_split(numbered_ids(10), 0.01, 0.2, p);
        CHECK(tiny.labeled_train.size() == 1);
    }
    Prng p(1);
    CHECK_THROWS_AS(make_split(numbered_ids(2), 0.5, 0.2, p), ConfigError);
    CHECK_THROWS_AS(make_split(numbered_ids(10), 0.0, 0.2, p), ConfigError);
    CHECK_THROWS_AS(make_split(numbered_ids(10), 1.5, 0.2, p), ConfigError);
    CHECK_THROWS_AS(make_split(numbered_ids(10), 0.5, 0.0, p), ConfigError);
    CHECK_THROWS_AS(make_split(numbered_ids(10), 0.5, 1.0, p), ConfigError);
    CHECK_THROWS_AS(make_split(numbered_ids(10), 0.5, 0.99, p), ConfigError);
}

TEST_CASE("split file round-trip and strict parsing") {
    Prng p(9);
    DatasetSplit split = make_split(numbered_ids(8), 0.4, 0.25, p);
    split.seed = 1234;

    const auto dir = std::filesystem::temp_directory_path() / "ssgan_split_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "split.json";
    save_split(path, split);
    DatasetSplit back = load_split(path);
    CHECK(back.labeled_train == split.labeled_train);
    CHECK(back.unlabeled_train == split.unlabeled_train);
    CHECK(back.test == split.test);
    CHECK(back.labeled_fraction == split.labeled_fraction);
    CHECK(back.seed == 1234);

    auto write_and_expect_reject = [&](const std::string& text) {
        const auto bad = dir / "bad.json";
        std::ofstream(bad) << text;
        CHECK_THROWS_AS(load_split(bad), FormatError);
    };
    write_and_expect_reject(R"({"labeled_train":["a"],"unlabeled_train":[],"test":["b"],)"
                            R"("labeled_fraction":0.3,"seed":1,"extra":true})");
    write_and_expect_reject(R"({"labeled_train":["a"],"unlabeled_train":[],)"
                            R"("labeled_fraction":0.3,"seed":1})"); // no test key
    write_and_expect_reject(R"({"labeled_train":["a"],"unlabeled_train":["a"],"test":["b"],)"
                            R"("labeled_fraction":0.3,"seed":1})"); // id in two pools
    write_and_expect_reject(R"({"labeled_train":[],"unlabeled_train":[],"test":["b"],)"
                            R"("labeled_fraction":0.3,"seed":1})"); // empty labeled pool
    write_and_expect_reject(R"({"labeled_train":["a"],"unlabeled_train":[],"test":["b"],)"
                            R"("labeled_fraction":0.3,"seed":-4})"); // signed seed
    write_and_expect_reject("not json at all");
    CHECK_THROWS_AS(load_split(dir / "missing.json"), FormatError);
}

TEST_CASE("dataset add validates, normalizes, and keeps ids sorted") {
    Dataset dataset = sentinel_dataset(3);
    CHECK(dataset.size() == 3);
    const auto ids = dataset.ids();
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    CHECK(dataset.entry("img_100").image.normalized);
    CHECK(dataset.entry("img_100").mask.has_value());
    CHECK_THROWS_AS(dataset.entry("nope"), DataError);
    CHECK(dataset.has("img_101"));
    CHECK_FALSE(dataset.has("nope"));

    { // duplicate id
        Dataset d = sentinel_dataset(1);
        MultispectralImage again;
        again.id = "img_100";
        again.set_channel(kChannelRed, Raster(Shape{16, 16}));
        CHECK_THROWS_AS(d.add(std::move(again), std::nullopt), DataError);
    }
    { // mask extents must match the image
        Dataset d;
        MultispectralImage image;
        image.id = "x";
        image.set_channel(kChannelRed, Raster(Shape{16, 16}));
        LabelMask mask;
        mask.id = "x";
        mask.width = mask.height = 8;
        mask.values.assign(64, 0);
        CHECK_THROWS_AS(d.add(std::move(image), mask), ShapeError);
    }
    { // empty id
        Dataset d;
        MultispectralImage image;
        image.set_channel(kChannelRed, Raster(Shape{16, 16}));
        CHECK_THROWS_AS(d.add(std::move(image), std::nullopt), DataError);
    }
}

TEST_CASE("directory round-trip attaches masks where present") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ssgan_ds_dir_test";
    fs::remove_all(dir);
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");

    Dataset source = sentinel_dataset(3);
    for (const std::string& id : source.ids()) {
        const auto& entry = source.entry(id);
        // write un-normalized rasters back out: (v+1)/2 undoes the load mapping
        for (const char* ch : {kChannelRed, kChannelNir}) {
            Raster raw = entry.image.channel(ch);
            raw.array() = (raw.array() + 1.0f) / 2.0f;
            save_raster(dir / "images" / (id + "." + ch + ".msr"), raw);
        }
        if (id != "img_102") save_mask(dir / "masks" / (id + ".pgm"), *entry.mask);
    }

    Dataset loaded = Dataset::load_dir(dir);
    CHECK(loaded.ids() == source.ids());
    CHECK(loaded.entry("img_100").image.normalized);
    CHECK(loaded.entry("img_100").mask.has_value());
    CHECK_FALSE(loaded.entry("img_102").mask.has_value());
    const Raster& a = loaded.entry("img_101").image.channel(kChannelRed);
    const Raster& b = source.entry("img_101").image.channel(kChannelRed);
    for (std::int64_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));
    }

    save_raster(dir / "images" / "weird.band.msr", Raster(Shape{2, 2}));
    CHECK_THROWS_AS(Dataset::load_dir(dir), DataError);
    fs::remove(dir / "images" / "weird.band.msr");
    CHECK_THROWS_AS(Dataset::load_dir(fs::temp_directory_path() / "ssgan_no_such_dir"),
                    DataError);
}

TEST_CASE("sample_batch is deterministic and well-shaped") {
    Dataset dataset = sentinel_dataset(6);
    DatasetSplit split = all_labeled(dataset);

    Prng p1(77), p2(77), p3(78);
    Batch a = sample_batch(dataset, split, Pool::Labeled, ChannelSelection::RedNir, 32, 8, 8, p1);
    Batch b = sample_batch(dataset, split, Pool::Labeled, ChannelSelection::RedNir, 32, 8, 8, p2);
    Batch c = sample_batch(dataset, split, Pool::Labeled, ChannelSelection::RedNir, 32, 8, 8, p3);

    REQUIRE(a.images.shape() == Shape{32, 2, 8, 8});
    REQUIRE(a.masks.has_value());
    CHECK(a.masks->n == 32);
    for (std::int64_t i = 0; i < a.images.size(); ++i) {
        CHECK(a.images[i] == b.images[i]);
        CHECK(a.images[i] >= -1.0f);
        CHECK(a.images[i] <= 1.0f);
    }
    CHECK(a.masks->values == b.masks->values);
    bool differs = false;
    for (std::int64_t i = 0; i < a.images.size() && !differs; ++i)
        differs = a.images[i] != c.images[i];
    CHECK(differs);
    a.masks->validate();
}

TEST_CASE("sampled tiles replay the documented draw order exactly") {
    Dataset dataset = sentinel_dataset(6);
    DatasetSplit split = all_labeled(dataset);
    const auto ids = dataset.ids();

    Prng sample_prng(31);
    Prng replay(31);
    Batch batch =
        sample_batch(dataset, split, Pool::Labeled, ChannelSelection::RedNir, 16, 8, 8, sample_prng);

    for (int b = 0; b < 16; ++b) {
        const std::string& id = ids[replay.next_index(static_cast<std::int64_t>(ids.size()))];
        const int row = static_cast<int>(replay.next_index(16 - 8 + 1));
        const int col = static_cast<int>(replay.next_index(16 - 8 + 1));
        const auto& entry = dataset.entry(id);
        const Raster& red = entry.image.channel(kChannelRed);
        const Raster& nir = entry.image.channel(kChannelNir);
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                CHECK(batch.images[batch.images.offset(b, 0, y, x)] ==
                      red[(row + y) * 16 + (col + x)]);
                CHECK(batch.images[batch.images.offset(b, 1, y, x)] ==
                      nir[(row + y) * 16 + (col + x)]);
                CHECK(batch.masks->at(b, y, x) == entry.mask->at(row + y, col + x));
            }
        }
    }
}

TEST_CASE("pool semantics: unlabeled drops masks, labeled requires them") {
    Dataset dataset = sentinel_dataset(6);
    DatasetSplit split;
    split.labeled_train = {"img_100", "img_101"};
    split.unlabeled_train = {"img_102", "img_103"};
    split.test = {"img_104", "img_105"};

    Prng p(3);
    Batch unlabeled =
        sample_batch(dataset, split, Pool::Unlabeled, ChannelSelection::Red, 4, 8, 8, p);
    CHECK_FALSE(unlabeled.masks.has_value());
    Batch test = sample_batch(dataset, split, Pool::Test, ChannelSelection::Red, 4, 8, 8, p);
    CHECK(test.masks.has_value());

    Dataset maskless = sentinel_dataset(6, false);
    CHECK_THROWS_AS(
        sample_batch(maskless, split, Pool::Labeled, ChannelSelection::Red, 4, 8, 8, p),
        DataError);
    // an unlabeled batch from maskless images is fine
    Batch ok = sample_batch(maskless, split, Pool::Unlabeled, ChannelSelection::Red, 4, 8, 8, p);
    CHECK(ok.images.shape() == Shape{4, 1, 8, 8});
}

TEST_CASE("sample_batch input validation") {
    Dataset dataset = sentinel_dataset(4);
    DatasetSplit split = all_labeled(dataset);
    Prng p(1);
    CHECK_THROWS_AS(
        sample_batch(dataset, split, Pool::Labeled, ChannelSelection::Red, 0, 8, 8, p),
        ConfigError);
    CHECK_THROWS_AS(
        sample_batch(dataset, split, Pool::Labeled, ChannelSelection::Red, 4, 17, 17, p),
        ConfigError); // tile exceeds the 16x16 images
    CHECK_THROWS_AS(
        sample_batch(dataset, split, Pool::Labeled, ChannelSelection::Ndvi, 4, 8, 8, p),
        DataError); // ndvi channel was never added
    DatasetSplit empty;
    empty.labeled_train = {};
    CHECK_THROWS_AS(
        sample_batch(dataset, empty, Pool::Labeled, ChannelSelection::Red, 4, 8, 8, p),
        DataError);
}
