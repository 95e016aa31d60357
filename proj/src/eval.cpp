#include "ssgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ssgan/errors.hpp"
#include "ssgan/nn_kernels.hpp"
#include "ssgan/raster_io.hpp"

namespace ssgan {

namespace {

using nlohmann::json;

// Non-overlapping tile starts covering [0, extent); the last start is pulled
// inward so every pixel is covered exactly once per axis order.
std::vector<int> tile_starts(int extent, int tile) {
    std::vector<int> starts;
    for (int s = 0; s + tile <= extent; s += tile) starts.push_back(s);
    if (starts.empty() || starts.back() + tile < extent) starts.push_back(extent - tile);
    return starts;
}

} // namespace

void ConfusionMatrix::add(int true_class, int predicted_class, std::int64_t n) {
    if (true_class < 0 || true_class >= 3 || predicted_class < 0 || predicted_class >= 3) {
        throw ContractError("confusion matrix classes must lie in [0, 3)");
    }
    counts[static_cast<std::size_t>(true_class)][static_cast<std::size_t>(predicted_class)] += n;
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (const auto& row : counts)
        for (std::int64_t v : row) t += v;
    return t;
}

std::int64_t ConfusionMatrix::tp(int c) const {
    return counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
}

std::int64_t ConfusionMatrix::fp(int c) const {
    std::int64_t col = 0;
    for (int r = 0; r < 3; ++r) col += counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return col - tp(c);
}

std::int64_t ConfusionMatrix::fn(int c) const {
    std::int64_t row = 0;
    for (int p = 0; p < 3; ++p) row += counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(p)];
    return row - tp(c);
}

std::array<ClassScore, 3> f1_scores(const ConfusionMatrix& confusion) {
    std::array<ClassScore, 3> scores{};
    for (int c = 0; c < 3; ++c) {
        const double tp = static_cast<double>(confusion.tp(c));
        const double fp = static_cast<double>(confusion.fp(c));
        const double fn = static_cast<double>(confusion.fn(c));
        ClassScore& s = scores[static_cast<std::size_t>(c)];
        if (tp + fp == 0.0) {
            s.precision_undefined = true;
        } else {
            s.precision = tp / (tp + fp);
        }
        if (tp + fn == 0.0) {
            s.recall_undefined = true;
        } else {
            s.recall = tp / (tp + fn);
        }
        // 2PR/(P+R) == 2TP/(2TP+FP+FN); the right side also settles the 0/0 case.
        if (2.0 * tp + fp + fn == 0.0) {
            s.f1_undefined = true;
        } else {
            s.f1 = 2.0 * tp / (2.0 * tp + fp + fn);
        }
    }
    return scores;
}

void to_json(json& j, const EvalReport& report) {
    json confusion = json::array();
    for (const auto& row : report.confusion.counts) {
        confusion.push_back(json(row));
    }
    json per_class = json::object();
    for (int c = 0; c < 3; ++c) {
        const ClassScore& s = report.per_class[static_cast<std::size_t>(c)];
        per_class[class_name(c)] = json{{"precision", s.precision},
                                        {"recall", s.recall},
                                        {"f1", s.f1},
                                        {"precision_undefined", s.precision_undefined},
                                        {"recall_undefined", s.recall_undefined},
                                        {"f1_undefined", s.f1_undefined}};
    }
    j = json{{"pool", report.pool},
             {"selection", report.selection},
             {"config_hash", report.config_hash},
             {"config", report.config},
             {"confusion", confusion},
             {"per_class", per_class},
             {"macro_f1", report.macro_f1},
             {"pixels", report.confusion.total()}};
}

std::string report_text(const EvalReport& report) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "pool: %s  selection: %s  pixels: %lld\n",
                  report.pool.c_str(), report.selection.c_str(),
                  static_cast<long long>(report.confusion.total()));
    out += line;
    std::snprintf(line, sizeof line, "%-12s %9s %9s %9s\n", "class", "precision", "recall", "f1");
    out += line;
    for (int c = 0; c < 3; ++c) {
        const ClassScore& s = report.per_class[static_cast<std::size_t>(c)];
        auto cell = [](double v, bool undef) {
            char buf[16];
            if (undef) {
                std::snprintf(buf, sizeof buf, "%9s", "n/a");
            } else {
                std::snprintf(buf, sizeof buf, "%9.3f", v);
            }
            return std::string(buf);
        };
        std::snprintf(line, sizeof line, "%-12s %s %s %s\n", class_name(c),
                      cell(s.precision, s.precision_undefined).c_str(),
                      cell(s.recall, s.recall_undefined).c_str(),
                      cell(s.f1, s.f1_undefined).c_str());
        out += line;
    }
    std::snprintf(line, sizeof line, "macro_f1: %.3f\n", report.macro_f1);
    out += line;
    return out;
}

std::vector<std::uint8_t> predict_image(DiscriminatorParams<float>& disc,
                                        const MultispectralImage& image,
                                        ChannelSelection selection, int tile_h, int tile_w) {
    if (!image.normalized) {
        throw ContractError("predict_image needs a normalized image");
    }
    if (image.height < tile_h || image.width < tile_w) {
        throw ConfigError("tile " + std::to_string(tile_h) + "x" + std::to_string(tile_w) +
                          " does not fit image '" + image.id + "'");
    }
    const std::vector<std::string> channel_names = selection_channels(selection);
    const int channels = static_cast<int>(channel_names.size());
    if (channels != disc.spec.in_channels) {
        throw ConfigError("selection " + std::string(selection_name(selection)) + " has " +
                          std::to_string(channels) + " channels but the discriminator expects " +
                          std::to_string(disc.spec.in_channels));
    }

    const std::vector<int> rows = tile_starts(image.height, tile_h);
    const std::vector<int> cols = tile_starts(image.width, tile_w);
    const int tiles = static_cast<int>(rows.size() * cols.size());

    // One batched forward over all tiles of the image.
    Tensor<float> batch(Shape{tiles, channels, tile_h, tile_w});
    int b = 0;
    for (int r : rows) {
        for (int col : cols) {
            for (int c = 0; c < channels; ++c) {
                const Raster& raster = image.channel(channel_names[static_cast<std::size_t>(c)]);
                for (int y = 0; y < tile_h; ++y) {
                    const float* src = raster.data() + raster.offset(0, 0, r + y, col);
                    float* dst = batch.data() + batch.offset(b, c, y, 0);
                    std::copy_n(src, tile_w, dst);
                }
            }
            ++b;
        }
    }
    Tensor<float> logits = discriminator_forward(disc, batch, NormMode::Infer);

    // Later tiles overwrite earlier ones on the inward-aligned edge bands.
    std::vector<std::uint8_t> prediction(
        static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width), 0);
    b = 0;
    for (int r : rows) {
        for (int col : cols) {
            for (int y = 0; y < tile_h; ++y) {
                for (int x = 0; x < tile_w; ++x) {
                    int best = 0;
                    float best_logit = logits.at(b, 0, y, x);
                    for (int c = 1; c < kRealClasses; ++c) {
                        const float v = logits.at(b, c, y, x);
                        if (v > best_logit) {
                            best_logit = v;
                            best = c;
                        }
                    }
                    prediction[static_cast<std::size_t>(r + y) * image.width + (col + x)] =
                        static_cast<std::uint8_t>(best);
                }
            }
            ++b;
        }
    }
    return prediction;
}

EvalReport evaluate(DiscriminatorParams<float>& disc, const Dataset& dataset,
                    const DatasetSplit& split, Pool pool, ChannelSelection selection,
                    int tile_h, int tile_w) {
    const std::vector<std::string>& ids = pool_ids(split, pool);
    if (ids.empty()) {
        throw DataError(std::string("pool '") + pool_name(pool) + "' has no images to evaluate");
    }

    EvalReport report;
    report.pool = pool_name(pool);
    report.selection = selection_name(selection);
    for (const std::string& id : ids) {
        const Dataset::Entry& entry = dataset.entry(id);
        if (!entry.mask) {
            throw DataError("image '" + id + "' has no mask; cannot score pool '" +
                            std::string(pool_name(pool)) + "'");
        }
        const std::vector<std::uint8_t> prediction =
            predict_image(disc, entry.image, selection, tile_h, tile_w);
        const LabelMask& mask = *entry.mask;
        for (int y = 0; y < mask.height; ++y) {
            for (int x = 0; x < mask.width; ++x) {
                const std::uint8_t truth = mask.at(y, x);
                if (truth == kLabelIgnore) continue;
                report.confusion.add(truth,
                                     prediction[static_cast<std::size_t>(y) * mask.width + x]);
            }
        }
    }
    report.per_class = f1_scores(report.confusion);
    report.macro_f1 = (report.per_class[0].f1 + report.per_class[1].f1 + report.per_class[2].f1) / 3.0;
    return report;
}

std::vector<std::filesystem::path> render_maps(DiscriminatorParams<float>& disc,
                                               const MultispectralImage& image,
                                               ChannelSelection selection,
                                               const std::filesystem::path& out_dir,
                                               const std::string& prefix) {
    if (!image.normalized) {
        throw ContractError("render_maps needs a normalized image");
    }
    Tensor<float> input = select_channels(image, selection);
    Tensor<float> logits = discriminator_forward(disc, input, NormMode::Infer);
    Tensor<float> probs = softmax_channels(logits);

    std::filesystem::create_directories(out_dir);
    const int h = image.height;
    const int w = image.width;
    std::vector<std::filesystem::path> paths;
    std::vector<std::uint8_t> plane(static_cast<std::size_t>(h) * w);
    for (int c = 0; c < kLogitChannels; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                plane[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(
                    std::lround(std::clamp(probs.at(0, c, y, x), 0.0f, 1.0f) * 255.0f));
            }
        }
        std::filesystem::path path = out_dir / (prefix + "." + class_name(c) + ".pgm");
        save_gray_pgm(path, h, w, plane);
        paths.push_back(path);
    }

    static constexpr std::uint8_t kArgmaxGray[4] = {0, 85, 170, 255};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int best = 0;
            float best_p = probs.at(0, 0, y, x);
            for (int c = 1; c < kLogitChannels; ++c) {
                const float v = probs.at(0, c, y, x);
                if (v > best_p) {
                    best_p = v;
                    best = c;
                }
            }
            plane[static_cast<std::size_t>(y) * w + x] = kArgmaxGray[best];
        }
    }
    std::filesystem::path argmax_path = out_dir / (prefix + ".argmax.pgm");
    save_gray_pgm(argmax_path, h, w, plane);
    paths.push_back(argmax_path);
    return paths;
}

} // namespace ssgan
