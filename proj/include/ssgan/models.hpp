#pragma once

// The adversarial pair: a DCGAN-style generator that maps uniform noise to
// multispectral tiles, and a fully convolutional discriminator that labels
// every pixel as background/crop/weed/fake. The discriminator is an
// encoder-decoder: the first encoder layer keeps full resolution (stride 1)
// so that three stride-2 encoder stages are exactly undone by three stride-2
// decoder stages and the 1x1 head emits logits at input resolution.

#include <array>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ssgan/classes.hpp"
#include "ssgan/errors.hpp"
#include "ssgan/nn_kernels.hpp"
#include "ssgan/prng.hpp"
#include "ssgan/tape.hpp"
#include "ssgan/tensor.hpp"

namespace ssgan {

inline constexpr double kWeightInitStdDev = 0.02;
inline constexpr int kUpsampleStages = 4; // generator stride-2 stages; tiles are multiples of 16

// ---------------------------------------------------------------------------
// Named parameter store. Entry order is fixed at build time and defines the
// optimizer and checkpoint order; running statistics are non-trainable.

template <typename S>
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor<S> value;
        bool trainable;
    };

    void add(std::string name, Tensor<S> value, bool trainable) {
        if (index_.count(name)) {
            throw ContractError("duplicate parameter name '" + name + "'");
        }
        index_.emplace(name, entries_.size());
        entries_.push_back(Entry{std::move(name), std::move(value), trainable});
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor<S>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
        return entries_[it->second].value;
    }
    const Tensor<S>& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
        return entries_[it->second].value;
    }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    void require_finite(const std::string& what) const {
        for (const auto& e : entries_) e.value.require_finite(what + "." + e.name);
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Taped view of a parameter set: one leaf per trainable entry. Running
// statistics never go on the tape; batch_norm reads and updates them in the
// owning ParamSet directly.
struct TapedParams {
    std::unordered_map<std::string, Var> vars;

    Var at(const std::string& name) const {
        auto it = vars.find(name);
        if (it == vars.end()) throw ContractError("parameter '" + name + "' was not lifted");
        return it->second;
    }
};

template <typename S>
TapedParams lift_params(Tape<S>& tape, const ParamSet<S>& set, bool requires_grad) {
    TapedParams out;
    for (const auto& e : set.entries()) {
        if (!e.trainable) continue;
        out.vars.emplace(e.name, tape.leaf(e.value, requires_grad));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Specs.

struct GeneratorSpec {
    int noise_dim = 100;
    int base_maps = 256;
    std::array<int, 3> up_maps{128, 64, 32};
    int out_channels = 1;
    int tile_h = 32;
    int tile_w = 32;

    int seed_h() const { return tile_h / 16; } // spatial extent of the projected seed volume
    int seed_w() const { return tile_w / 16; }

    void validate() const {
        if (tile_h < 16 || tile_w < 16 || tile_h % 16 != 0 || tile_w % 16 != 0) {
            throw ConfigError("generator tile extents must be positive multiples of 16, got " +
                              std::to_string(tile_h) + "x" + std::to_string(tile_w));
        }
        if (out_channels < 1 || out_channels > 3) {
            throw ConfigError("generator output channels must be 1, 2, or 3");
        }
        if (noise_dim < 1 || base_maps < 1 || up_maps[0] < 1 || up_maps[1] < 1 || up_maps[2] < 1) {
            throw ConfigError("generator widths must be positive");
        }
    }
};

struct DiscriminatorSpec {
    int in_channels = 1;
    std::array<int, 4> encoder_maps{32, 64, 128, 256};
    std::array<int, 3> decoder_maps{128, 64, 32};
    double leaky_slope = 0.2;

    void validate() const {
        if (in_channels < 1 || in_channels > 3) {
            throw ConfigError("discriminator input channels must be 1, 2, or 3");
        }
        for (int m : encoder_maps)
            if (m < 1) throw ConfigError("encoder widths must be positive");
        for (int m : decoder_maps)
            if (m < 1) throw ConfigError("decoder widths must be positive");
        if (!(leaky_slope > 0 && leaky_slope < 1)) {
            throw ConfigError("leaky slope must lie in (0,1)");
        }
    }
};

template <typename S>
struct GeneratorParams {
    GeneratorSpec spec;
    ParamSet<S> params;
};

template <typename S>
struct DiscriminatorParams {
    DiscriminatorSpec spec;
    ParamSet<S> params;
};

// ---------------------------------------------------------------------------
// Builders. Conv weights are drawn normal(0, 0.02); biases start at 0,
// batch-norm at gamma=1, beta=0 with running stats (0, 1).

namespace detail {

template <typename S>
void add_batch_norm(ParamSet<S>& set, const std::string& layer, int channels) {
    set.add(layer + ".bn.gamma", Tensor<S>::full(Shape{channels}, S(1)), true);
    set.add(layer + ".bn.beta", Tensor<S>(Shape{channels}), true);
    set.add(layer + ".bn.running_mean", Tensor<S>(Shape{channels}), false);
    set.add(layer + ".bn.running_var", Tensor<S>::full(Shape{channels}, S(1)), false);
}

template <typename S>
void add_conv(ParamSet<S>& set, const std::string& layer, Shape kernel_shape, int bias_extent,
              Prng& prng) {
    set.add(layer + ".kernel",
            prng_normal<S>(prng, kernel_shape, S(0), S(kWeightInitStdDev)), true);
    set.add(layer + ".bias", Tensor<S>(Shape{bias_extent}), true);
}

} // namespace detail

template <typename S>
GeneratorParams<S> build_generator(const GeneratorSpec& spec, Prng& prng) {
    spec.validate();
    GeneratorParams<S> gen;
    gen.spec = spec;
    ParamSet<S>& p = gen.params;

    const int seed_maps = spec.base_maps * spec.seed_h() * spec.seed_w();
    detail::add_conv(p, "proj", Shape{seed_maps, spec.noise_dim, 1, 1}, seed_maps, prng);
    detail::add_batch_norm(p, "proj", spec.base_maps);

    const std::array<int, 5> maps{spec.base_maps, spec.up_maps[0], spec.up_maps[1],
                                  spec.up_maps[2], spec.out_channels};
    for (int i = 0; i < kUpsampleStages; ++i) {
        const std::string layer = "up" + std::to_string(i + 1);
        detail::add_conv(p, layer, Shape{maps[i], maps[i + 1], 4, 4}, maps[i + 1], prng);
        if (i + 1 < kUpsampleStages) detail::add_batch_norm(p, layer, maps[i + 1]);
    }
    return gen;
}

template <typename S>
DiscriminatorParams<S> build_discriminator(const DiscriminatorSpec& spec, Prng& prng) {
    spec.validate();
    DiscriminatorParams<S> disc;
    disc.spec = spec;
    ParamSet<S>& p = disc.params;
    const auto& e = spec.encoder_maps;
    const auto& d = spec.decoder_maps;

    // enc1 keeps full resolution (3x3, stride 1) and carries no batch norm.
    detail::add_conv(p, "enc1", Shape{e[0], spec.in_channels, 3, 3}, e[0], prng);
    for (int i = 1; i < 4; ++i) {
        const std::string layer = "enc" + std::to_string(i + 1);
        detail::add_conv(p, layer, Shape{e[i], e[i - 1], 4, 4}, e[i], prng);
        detail::add_batch_norm(p, layer, e[i]);
    }
    const std::array<int, 4> dec_in{e[3], d[0], d[1], d[2]};
    for (int i = 0; i < 3; ++i) {
        const std::string layer = "dec" + std::to_string(i + 1);
        detail::add_conv(p, layer, Shape{dec_in[i], d[i], 4, 4}, d[i], prng);
        detail::add_batch_norm(p, layer, d[i]);
    }
    detail::add_conv(p, "head", Shape{kLogitChannels, d[2], 1, 1}, kLogitChannels, prng);
    return disc;
}

// ---------------------------------------------------------------------------
// Forward passes on a tape. Train-mode normalization updates the running
// statistics stored in the (mutable) parameter set.

namespace detail {

template <typename S>
Var norm_layer(Tape<S>& tape, Var x, ParamSet<S>& set, const TapedParams& vars,
               const std::string& layer, NormMode mode, bool update_stats = true) {
    // Skipping the update (train mode only) keeps generated batches out of the
    // running statistics used at inference.
    Tensor<S>* rm = &set.at(layer + ".bn.running_mean");
    Tensor<S>* rv = &set.at(layer + ".bn.running_var");
    if (mode == NormMode::Train && !update_stats) {
        rm = nullptr;
        rv = nullptr;
    }
    return batch_norm(tape, x, vars.at(layer + ".bn.gamma"), vars.at(layer + ".bn.beta"), rm, rv,
                      mode);
}

} // namespace detail

template <typename S>
Var generator_forward(Tape<S>& tape, GeneratorParams<S>& gen, const TapedParams& vars, Var noise,
                      NormMode mode) {
    const GeneratorSpec& spec = gen.spec;
    const Shape& zs = tape.value(noise).shape();
    if (zs.rank() != 2 || zs.dim(1) != spec.noise_dim) {
        throw ShapeError("generator noise must be (N," + std::to_string(spec.noise_dim) +
                         "), got " + zs.str());
    }
    const int n = zs.dim(0);

    Var h = reshape(tape, noise, Shape{n, spec.noise_dim, 1, 1});
    h = conv2d(tape, h, vars.at("proj.kernel"), vars.at("proj.bias"), 1, 0);
    h = reshape(tape, h, Shape{n, spec.base_maps, spec.seed_h(), spec.seed_w()});
    h = detail::norm_layer(tape, h, gen.params, vars, "proj", mode);
    h = relu(tape, h);

    for (int i = 1; i < kUpsampleStages; ++i) {
        const std::string layer = "up" + std::to_string(i);
        h = conv2d_transpose(tape, h, vars.at(layer + ".kernel"), vars.at(layer + ".bias"), 2, 1);
        h = detail::norm_layer(tape, h, gen.params, vars, layer, mode);
        h = relu(tape, h);
    }
    h = conv2d_transpose(tape, h, vars.at("up4.kernel"), vars.at("up4.bias"), 2, 1);
    return tanh(tape, h);
}

template <typename S>
Var discriminator_forward(Tape<S>& tape, DiscriminatorParams<S>& disc, const TapedParams& vars,
                          Var images, NormMode mode, bool update_stats = true) {
    const DiscriminatorSpec& spec = disc.spec;
    const Shape& xs = tape.value(images).shape();
    if (xs.rank() != 4) {
        throw ShapeError("discriminator input must be rank 4, got " + xs.str());
    }
    if (xs.dim(1) != spec.in_channels) {
        throw ShapeError("discriminator expects " + std::to_string(spec.in_channels) +
                         " channels, got " + xs.str());
    }
    if (xs.dim(2) % 16 != 0 || xs.dim(3) % 16 != 0) {
        throw ShapeError("discriminator spatial extents must be multiples of 16, got " + xs.str());
    }
    const S slope = static_cast<S>(spec.leaky_slope);

    Var h = conv2d(tape, images, vars.at("enc1.kernel"), vars.at("enc1.bias"), 1, 1);
    h = leaky_relu(tape, h, slope);
    for (int i = 2; i <= 4; ++i) {
        const std::string layer = "enc" + std::to_string(i);
        h = conv2d(tape, h, vars.at(layer + ".kernel"), vars.at(layer + ".bias"), 2, 1);
        h = detail::norm_layer(tape, h, disc.params, vars, layer, mode, update_stats);
        h = leaky_relu(tape, h, slope);
    }
    for (int i = 1; i <= 3; ++i) {
        const std::string layer = "dec" + std::to_string(i);
        h = conv2d_transpose(tape, h, vars.at(layer + ".kernel"), vars.at(layer + ".bias"), 2, 1);
        h = detail::norm_layer(tape, h, disc.params, vars, layer, mode, update_stats);
        h = leaky_relu(tape, h, slope);
    }
    return conv2d(tape, h, vars.at("head.kernel"), vars.at("head.bias"), 1, 0);
}

// Untraced conveniences for inference and tests.

template <typename S>
Tensor<S> generator_forward(GeneratorParams<S>& gen, const Tensor<S>& noise, NormMode mode) {
    Tape<S> tape;
    TapedParams vars = lift_params(tape, gen.params, false);
    Var out = generator_forward(tape, gen, vars, tape.constant(noise), mode);
    return tape.value(out);
}

template <typename S>
Tensor<S> discriminator_forward(DiscriminatorParams<S>& disc, const Tensor<S>& images,
                                NormMode mode) {
    Tape<S> tape;
    TapedParams vars = lift_params(tape, disc.params, false);
    Var out = discriminator_forward(tape, disc, vars, tape.constant(images), mode);
    return tape.value(out);
}

} // namespace ssgan
