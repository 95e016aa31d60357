#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ssgan/image.hpp"
#include "ssgan/raster_io.hpp"

using namespace ssgan;

namespace {

// Hand-encoded 2x2 raster [1 2; 3 4]: magic, u32 LE extents, f32 LE payload.
const std::vector<std::uint8_t> kGoldenRaster = {
    0x4D, 0x53, 0x52, 0x31,                         // "MSR1"
    0x02, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, // h=2, w=2
    0x00, 0x00, 0x80, 0x3F,                         // 1.0f
    0x00, 0x00, 0x00, 0x40,                         // 2.0f
    0x00, 0x00, 0x40, 0x40,                         // 3.0f
    0x00, 0x00, 0x80, 0x40,                         // 4.0f
};
constexpr std::size_t kStructuralBytes = 12;

// Hand-encoded 2x2 binary PGM mask holding every legal value once.
const std::vector<std::uint8_t> kGoldenMask = {
    'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 0, 1, 2, 255,
};

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "ssgan_io_test";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("golden raster fixture decodes exactly and re-encodes bitwise") {
    Raster r = decode_raster(kGoldenRaster, "golden");
    REQUIRE(r.shape() == Shape{2, 2});
    CHECK(r[0] == 1.0f);
    CHECK(r[1] == 2.0f);
    CHECK(r[2] == 3.0f);
    CHECK(r[3] == 4.0f);
    CHECK(encode_raster(r) == kGoldenRaster);
}

TEST_CASE("raster file round-trip is bitwise, including non-finite values") {
    Raster r(Shape{2, 3});
    float vals[] = {0.0f, -0.0f, 1e-40f, -3.5f, std::nanf(""), 1e30f};
    for (int i = 0; i < 6; ++i) r[i] = vals[i];

    const auto path = temp_dir() / "roundtrip.msr";
    save_raster(path, r);
    Raster back = load_raster(path);
    REQUIRE(back.shape() == r.shape());
    for (std::int64_t i = 0; i < r.size(); ++i) {
        CHECK(std::bit_cast<std::uint32_t>(back[i]) == std::bit_cast<std::uint32_t>(r[i]));
    }

    Tensor<float> rank3(Shape{1, 2, 2});
    CHECK_THROWS_AS(encode_raster(rank3), ShapeError);
}

TEST_CASE("every structural byte mutation of the raster fixture is rejected") {
    for (std::size_t pos = 0; pos < kStructuralBytes; ++pos) {
        for (int v = 0; v < 256; ++v) {
            if (v == kGoldenRaster[pos]) continue;
            auto bytes = kGoldenRaster;
            bytes[pos] = static_cast<std::uint8_t>(v);
            CHECK_THROWS_AS(decode_raster(bytes, "fuzz"), FormatError);
        }
    }
}

TEST_CASE("raster payload mutations decode to visibly different values") {
    for (std::size_t pos = kStructuralBytes; pos < kGoldenRaster.size(); ++pos) {
        for (int v : {0x00, 0x01, 0x7F, 0x80, 0xFF}) {
            if (v == kGoldenRaster[pos]) continue;
            auto bytes = kGoldenRaster;
            bytes[pos] = static_cast<std::uint8_t>(v);
            Raster r = decode_raster(bytes, "fuzz");
            REQUIRE(r.shape() == Shape{2, 2});
            const auto idx = static_cast<std::int64_t>((pos - kStructuralBytes) / 4);
            Raster golden = decode_raster(kGoldenRaster, "golden");
            CHECK(std::bit_cast<std::uint32_t>(r[idx]) !=
                  std::bit_cast<std::uint32_t>(golden[idx]));
        }
    }
}

TEST_CASE("raster truncations and trailing bytes are rejected") {
    for (std::size_t len = 0; len < kGoldenRaster.size(); ++len) {
        std::vector<std::uint8_t> bytes(kGoldenRaster.begin(),
                                        kGoldenRaster.begin() + static_cast<std::ptrdiff_t>(len));
        CHECK_THROWS_AS(decode_raster(bytes, "truncated"), FormatError);
    }
    auto extended = kGoldenRaster;
    extended.push_back(0);
    CHECK_THROWS_AS(decode_raster(extended, "extended"), FormatError);
}

TEST_CASE("golden mask fixture decodes exactly and re-encodes bitwise") {
    LabelMask mask = decode_mask(kGoldenMask, "golden");
    REQUIRE(mask.width == 2);
    REQUIRE(mask.height == 2);
    REQUIRE(mask.values == std::vector<std::uint8_t>({0, 1, 2, 255}));
    CHECK(encode_mask(mask) == kGoldenMask);

    const auto path = temp_dir() / "golden_mask.pgm";
    save_mask(path, mask);
    LabelMask back = load_mask(path);
    CHECK(back.values == mask.values);
    CHECK(back.id == "golden_mask");
}

TEST_CASE("mask fuzz never crashes: every byte mutation rejects or stays valid") {
    for (std::size_t pos = 0; pos < kGoldenMask.size(); ++pos) {
        for (int v = 0; v < 256; ++v) {
            if (v == kGoldenMask[pos]) continue;
            auto bytes = kGoldenMask;
            bytes[pos] = static_cast<std::uint8_t>(v);
            try {
                LabelMask mask = decode_mask(bytes, "fuzz");
                CHECK(mask.width > 0);
                CHECK(mask.height > 0);
                for (std::uint8_t mv : mask.values) {
                    CHECK((mv == 0 || mv == 1 || mv == 2 || mv == 255));
                }
            } catch (const FormatError&) {
                // rejection is the expected outcome for structural damage
            }
        }
    }
}

TEST_CASE("mask payload values outside the label set are rejected with offsets") {
    auto bytes = kGoldenMask;
    bytes[11] = 3; // first payload byte
    CHECK_THROWS_WITH_AS(decode_mask(bytes, "fuzz"),
                         doctest::Contains("outside {0,1,2,255}"), FormatError);

    bytes = kGoldenMask;
    bytes[11] = 1; // still a legal label: loads with just that pixel changed
    LabelMask mask = decode_mask(bytes, "fuzz");
    CHECK(mask.values == std::vector<std::uint8_t>({1, 1, 2, 255}));
}

TEST_CASE("mask header validation") {
    { // maxval must be exactly 255
        std::vector<std::uint8_t> bytes = {'P', '5', '\n', '2', ' ', '2', '\n',
                                           '2', '5', '4', '\n', 0, 1, 2, 255};
        CHECK_THROWS_WITH_AS(decode_mask(bytes, "maxval"), doctest::Contains("maxval"),
                             FormatError);
    }
    { // comments between header tokens are legal PGM
        std::string header = "P5\n# comment\n2 2\n255\n";
        std::vector<std::uint8_t> bytes(header.begin(), header.end());
        bytes.insert(bytes.end(), {0, 1, 2, 255});
        LabelMask mask = decode_mask(bytes, "comment");
        CHECK(mask.values == std::vector<std::uint8_t>({0, 1, 2, 255}));
    }
    { // truncations of the golden mask always reject
        for (std::size_t len = 0; len < kGoldenMask.size(); ++len) {
            std::vector<std::uint8_t> bytes(
                kGoldenMask.begin(), kGoldenMask.begin() + static_cast<std::ptrdiff_t>(len));
            CHECK_THROWS_AS(decode_mask(bytes, "truncated"), FormatError);
        }
        auto extended = kGoldenMask;
        extended.push_back(0);
        CHECK_THROWS_AS(decode_mask(extended, "extended"), FormatError);
    }
}

TEST_CASE("ndvi fixture and guards") {
    Raster nir(Shape{1, 2});
    Raster red(Shape{1, 2});
    nir[0] = 0.8f; red[0] = 0.2f; // (0.8-0.2)/(0.8+0.2+1e-8)
    nir[1] = 0.0f; red[1] = 0.0f; // degenerate all-zero pixel
    Raster ndvi = compute_ndvi(nir, red);
    CHECK(ndvi[0] == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(ndvi[1] == 0.0f);

    Raster bad(Shape{1, 2});
    bad[0] = 1.5f;
    CHECK_THROWS_AS(compute_ndvi(bad, red), ContractError);
    Raster wrong(Shape{2, 2});
    CHECK_THROWS_AS(compute_ndvi(nir, wrong), ShapeError);
}

TEST_CASE("normalization maps reflectance to [-1,1] and leaves ndvi alone") {
    MultispectralImage img;
    img.id = "t";
    Raster red(Shape{1, 3});
    red[0] = 0.0f; red[1] = 0.5f; red[2] = 1.0f;
    Raster nir(Shape{1, 3});
    nir[0] = 0.25f; nir[1] = 0.75f; nir[2] = 1.0f;
    img.set_channel(kChannelRed, red);
    img.set_channel(kChannelNir, nir);
    img.set_channel(kChannelNdvi, compute_ndvi(nir, red));
    const Raster ndvi_before = img.channel(kChannelNdvi);

    CHECK_THROWS_AS(select_channels(img, ChannelSelection::Red), ContractError);

    MultispectralImage norm = normalize_channels(img);
    CHECK(norm.normalized);
    CHECK(norm.channel(kChannelRed)[0] == -1.0f);
    CHECK(norm.channel(kChannelRed)[1] == 0.0f);
    CHECK(norm.channel(kChannelRed)[2] == 1.0f);
    CHECK(norm.channel(kChannelNir)[1] == 0.5f);
    for (int i = 0; i < 3; ++i) CHECK(norm.channel(kChannelNdvi)[i] == ndvi_before[i]);
    CHECK_THROWS_AS(normalize_channels(norm), ContractError);

    Tensor<float> stacked = select_channels(norm, ChannelSelection::RedNir);
    REQUIRE(stacked.shape() == Shape{1, 2, 1, 3});
    CHECK(stacked[0] == -1.0f); // red plane first
    CHECK(stacked[4] == 0.5f);  // then nir

    MultispectralImage missing;
    missing.id = "m";
    missing.set_channel(kChannelRed, red);
    missing.normalized = true;
    CHECK_THROWS_AS(select_channels(missing, ChannelSelection::RedNir), DataError);

    CHECK(parse_selection("Red+NIR") == ChannelSelection::RedNir);
    CHECK_THROWS_AS(parse_selection("red"), ConfigError);
    CHECK(selection_channel_count(ChannelSelection::RedNirNdvi) == 3);
}
