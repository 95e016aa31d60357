#include "ssgan/image.hpp"

#include <cstring>

#include "ssgan/errors.hpp"

namespace ssgan {

const Raster& MultispectralImage::channel(const std::string& name) const {
    auto it = channels.find(name);
    if (it == channels.end()) {
        throw DataError("image '" + id + "' lacks channel '" + name + "'");
    }
    return it->second;
}

void MultispectralImage::set_channel(const std::string& name, Raster raster) {
    if (raster.shape().rank() != 2) {
        throw ShapeError("channel '" + name + "' must be rank 2, got " + raster.shape().str());
    }
    if (channels.empty() && width == 0 && height == 0) {
        height = raster.shape().dim(0);
        width = raster.shape().dim(1);
    }
    if (raster.shape().dim(0) != height || raster.shape().dim(1) != width) {
        throw ShapeError("channel '" + name + "' extents " + raster.shape().str() +
                         " do not match image '" + id + "' (" + std::to_string(height) + "," +
                         std::to_string(width) + ")");
    }
    channels[name] = std::move(raster);
}

void MultispectralImage::validate() const {
    if (width <= 0 || height <= 0) {
        throw ShapeError("image '" + id + "' has non-positive extents");
    }
    for (const auto& [name, raster] : channels) {
        if (raster.shape().dim(0) != height || raster.shape().dim(1) != width) {
            throw ShapeError("channel '" + name + "' extents do not match image '" + id + "'");
        }
        raster.require_finite("channel " + name + " of image " + id);
        const bool is_index = name == kChannelNdvi;
        const float lo = (normalized || is_index) ? -1.0f : 0.0f;
        for (std::int64_t i = 0; i < raster.size(); ++i) {
            if (raster[i] < lo || raster[i] > 1.0f) {
                throw ContractError("channel '" + name + "' of image '" + id + "' has value " +
                                    std::to_string(raster[i]) + " outside [" +
                                    std::to_string(lo) + ",1]");
            }
        }
    }
}

void LabelMask::validate() const {
    if (values.size() != static_cast<std::size_t>(width) * height) {
        throw ShapeError("mask '" + id + "' value count does not match extents");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!valid_mask_value(values[i])) {
            throw FormatError("mask '" + id + "' value " + std::to_string(int(values[i])) +
                              " at index " + std::to_string(i) + " outside {0,1,2,255}");
        }
    }
}

Raster compute_ndvi(const Raster& nir, const Raster& red) {
    require_same_shape(nir, red, "compute_ndvi");
    for (const Raster* r : {&nir, &red}) {
        for (std::int64_t i = 0; i < r->size(); ++i) {
            if ((*r)[i] < 0.0f || (*r)[i] > 1.0f) {
                throw ContractError("compute_ndvi expects un-normalized reflectance in [0,1], "
                                    "got " + std::to_string((*r)[i]));
            }
        }
    }
    Raster out(nir.shape());
    // Double accumulation keeps the epsilon guard exact near zero.
    for (std::int64_t i = 0; i < out.size(); ++i) {
        const double n = nir[i], r = red[i];
        out[i] = static_cast<float>((n - r) / (n + r + 1e-8));
    }
    return out;
}

MultispectralImage normalize_channels(MultispectralImage image) {
    if (image.normalized) {
        throw ContractError("image '" + image.id + "' is already normalized");
    }
    for (auto& [name, raster] : image.channels) {
        if (name == kChannelNdvi) continue;
        raster.array() = 2.0f * raster.array() - 1.0f;
    }
    image.normalized = true;
    return image;
}

const char* selection_name(ChannelSelection sel) {
    switch (sel) {
        case ChannelSelection::Red: return "Red";
        case ChannelSelection::Nir: return "NIR";
        case ChannelSelection::Ndvi: return "NDVI";
        case ChannelSelection::RedNir: return "Red+NIR";
        case ChannelSelection::RedNirNdvi: return "Red+NIR+NDVI";
    }
    throw ContractError("unhandled channel selection");
}

ChannelSelection parse_selection(const std::string& name) {
    for (ChannelSelection sel : kAllSelections) {
        if (name == selection_name(sel)) return sel;
    }
    throw ConfigError("unknown channel selection '" + name +
                      "'; valid selections: Red, NIR, NDVI, Red+NIR, Red+NIR+NDVI");
}

std::vector<std::string> selection_channels(ChannelSelection sel) {
    switch (sel) {
        case ChannelSelection::Red: return {kChannelRed};
        case ChannelSelection::Nir: return {kChannelNir};
        case ChannelSelection::Ndvi: return {kChannelNdvi};
        case ChannelSelection::RedNir: return {kChannelRed, kChannelNir};
        case ChannelSelection::RedNirNdvi: return {kChannelRed, kChannelNir, kChannelNdvi};
    }
    throw ContractError("unhandled channel selection");
}

int selection_channel_count(ChannelSelection sel) {
    return static_cast<int>(selection_channels(sel).size());
}

Tensor<float> select_channels(const MultispectralImage& image, ChannelSelection sel) {
    if (!image.normalized) {
        throw ContractError("select_channels requires a normalized image, got un-normalized '" +
                            image.id + "'");
    }
    const auto names = selection_channels(sel);
    const int c = static_cast<int>(names.size());
    Tensor<float> out(Shape{1, c, image.height, image.width});
    const std::int64_t plane = static_cast<std::int64_t>(image.height) * image.width;
    for (int ic = 0; ic < c; ++ic) {
        const Raster& raster = image.channel(names[ic]);
        std::memcpy(out.data() + ic * plane, raster.data(), sizeof(float) * plane);
    }
    return out;
}

} // namespace ssgan
