#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssgan/errors.hpp"

namespace ssgan {

// Pixel classes. The discriminator emits one logit channel per real class
// plus the fake channel marking generated samples.
inline constexpr std::uint8_t kClassBackground = 0;
inline constexpr std::uint8_t kClassCrop = 1;
inline constexpr std::uint8_t kClassWeed = 2;
inline constexpr std::uint8_t kLabelIgnore = 255;

inline constexpr int kRealClasses = 3;
inline constexpr int kLogitChannels = 4; // background, crop, weed, fake
inline constexpr int kFakeChannel = 3;

inline const char* class_name(int c) {
    switch (c) {
        case 0: return "background";
        case 1: return "crop";
        case 2: return "weed";
        case 3: return "fake";
        default: return "?";
    }
}

inline bool valid_mask_value(std::uint8_t v) {
    return v == kClassBackground || v == kClassCrop || v == kClassWeed || v == kLabelIgnore;
}

// Per-pixel class annotations for a batch of tiles, aligned with an image
// tensor of shape (N, C, H, W).
struct MaskBatch {
    int n = 0, h = 0, w = 0;
    std::vector<std::uint8_t> values; // row-major (n, h, w)

    MaskBatch() = default;
    MaskBatch(int n_, int h_, int w_)
        : n(n_), h(h_), w(w_), values(static_cast<std::size_t>(n_) * h_ * w_, kLabelIgnore) {}

    std::uint8_t& at(int in, int ih, int iw) {
        return values[(static_cast<std::size_t>(in) * h + ih) * w + iw];
    }
    std::uint8_t at(int in, int ih, int iw) const {
        return values[(static_cast<std::size_t>(in) * h + ih) * w + iw];
    }

    std::size_t size() const { return values.size(); }

    void validate() const {
        if (values.size() != static_cast<std::size_t>(n) * h * w) {
            throw ShapeError("mask batch value count does not match extents");
        }
        for (std::uint8_t v : values) {
            if (!valid_mask_value(v)) {
                throw FormatError("mask value " + std::to_string(int(v)) +
                                  " outside {0,1,2,255}");
            }
        }
    }
};

} // namespace ssgan
