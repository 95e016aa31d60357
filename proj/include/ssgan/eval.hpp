#pragma once

// F1 evaluation over held-out pools and confidence-map rendering. Inference
// uses running statistics and argmax over the three real classes; the fake
// channel never competes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssgan/dataset.hpp"
#include "ssgan/models.hpp"

namespace ssgan {

// Rows = true class, columns = predicted class, over {background, crop, weed};
// ignore pixels (255) are never counted.
struct ConfusionMatrix {
    std::array<std::array<std::int64_t, 3>, 3> counts{};

    void add(int true_class, int predicted_class, std::int64_t n = 1);
    std::int64_t total() const;
    std::int64_t tp(int c) const;
    std::int64_t fp(int c) const;
    std::int64_t fn(int c) const;
};

// Any 0/0 ratio scores 0 with its undefined flag set.
struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

std::array<ClassScore, 3> f1_scores(const ConfusionMatrix& confusion);

struct EvalReport {
    ConfusionMatrix confusion;
    std::array<ClassScore, 3> per_class{}; // background, crop, weed
    double macro_f1 = 0.0;
    std::string pool;
    std::string selection;
    std::string config_hash;  // echo of the checkpoint's config fingerprint
    nlohmann::json config;    // effective config echo
};

void to_json(nlohmann::json& j, const EvalReport& report);
std::string report_text(const EvalReport& report);

// Tiles every image of the pool with non-overlapping tiles (edge tiles
// aligned inward so coverage is exact), one batched inference pass per image.
EvalReport evaluate(DiscriminatorParams<float>& disc, const Dataset& dataset,
                    const DatasetSplit& split, Pool pool, ChannelSelection selection,
                    int tile_h, int tile_w);

// Per-pixel class predictions for one image, same inward-aligned tiling.
std::vector<std::uint8_t> predict_image(DiscriminatorParams<float>& disc,
                                        const MultispectralImage& image,
                                        ChannelSelection selection, int tile_h, int tile_w);

// Writes <prefix>.<class>.pgm confidence maps (softmax over all four
// channels, scaled to 0..255) plus <prefix>.argmax.pgm with gray levels
// {0, 85, 170, 255}. Returns the five paths in that order.
std::vector<std::filesystem::path> render_maps(DiscriminatorParams<float>& disc,
                                               const MultispectralImage& image,
                                               ChannelSelection selection,
                                               const std::filesystem::path& out_dir,
                                               const std::string& prefix);

} // namespace ssgan
