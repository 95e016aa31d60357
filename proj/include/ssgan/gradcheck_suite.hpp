#pragma once

// The full finite-difference verification suite: every differentiable op,
// each loss, and a reduced generator+discriminator stack. Shared by the unit
// tests, the acceptance harness, and the `gradcheck` CLI command. All checks
// run at 64-bit precision.
//
// Kinked activations (relu/leaky) make central differences unreliable when a
// pre-activation sits within epsilon of the kink, so each randomized case
// redraws its inputs until the whole forward pass stays clear of the band.

#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ssgan/classes.hpp"
#include "ssgan/gradcheck.hpp"
#include "ssgan/losses.hpp"
#include "ssgan/models.hpp"
#include "ssgan/prng.hpp"
#include "ssgan/tape.hpp"

namespace ssgan {

inline constexpr double kGradSuiteTolerance = 1e-3;

struct GradSuiteCase {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = kGradSuiteTolerance;
    int redraws = 0;
    bool passed = false;
};

struct GradSuiteReport {
    std::vector<GradSuiteCase> cases;

    bool all_passed() const {
        for (const auto& c : cases)
            if (!c.passed) return false;
        return !cases.empty();
    }

    std::string str() const {
        std::ostringstream os;
        for (const auto& c : cases) {
            os << (c.passed ? "ok  " : "FAIL") << "  " << c.name
               << "  max_rel_error=" << c.max_rel_error << "  tol=" << c.tolerance
               << (c.redraws ? "  redraws=" + std::to_string(c.redraws) : "") << "\n";
        }
        return os.str();
    }
};

namespace detail {

using BuildD = std::function<Var(Tape<double>&, const std::vector<Var>&)>;
using DrawFn = std::function<std::vector<Tensor<double>>(Prng&)>;

// Runs one case, redrawing inputs while any kink sits inside the guard band.
inline GradSuiteCase run_case(const std::string& name, const DrawFn& draw, const BuildD& build,
                              Prng& prng, double epsilon, double kink_band,
                              double denom_floor = 1e-8) {
    GradSuiteCase result;
    result.name = name;
    std::vector<Tensor<double>> params;
    for (int attempt = 0;; ++attempt) {
        if (attempt > 25) {
            throw OracleError("gradient check '" + name +
                              "' could not draw inputs clear of activation kinks");
        }
        Prng draw_prng = prng.split(static_cast<std::uint64_t>(attempt) + 1);
        params = draw(draw_prng);
        if (probe_kink_distance(build, params) >= kink_band) break;
        ++result.redraws;
    }
    GradCheckReport report = finite_diff_check(build, params, epsilon, denom_floor);
    result.max_rel_error = report.max_rel_error;
    result.passed = report.max_rel_error <= result.tolerance;
    return result;
}

inline MaskBatch random_mask(Prng& prng, int n, int h, int w, bool with_ignored) {
    MaskBatch mask;
    mask.n = n;
    mask.h = h;
    mask.w = w;
    mask.values.resize(static_cast<std::size_t>(n) * h * w);
    for (auto& v : mask.values) {
        const std::int64_t draw = prng.next_index(with_ignored ? 4 : 3);
        v = draw == 3 ? kLabelIgnore : static_cast<std::uint8_t>(draw);
    }
    // The loss rejects all-ignored batches; pin one labeled pixel.
    mask.values[0] = 0;
    return mask;
}

// Reduced generator+discriminator stack: full architecture, tiny widths.
inline GeneratorSpec reduced_generator_spec() {
    GeneratorSpec spec;
    spec.noise_dim = 16;
    spec.base_maps = 8;
    spec.up_maps = {4, 2, 1};
    spec.out_channels = 1;
    spec.tile_h = spec.tile_w = 32;
    return spec;
}

inline DiscriminatorSpec reduced_discriminator_spec() {
    DiscriminatorSpec spec;
    spec.in_channels = 1;
    spec.encoder_maps = {1, 2, 4, 8};
    spec.decoder_maps = {4, 2, 1};
    return spec;
}

// Assigns the flat leaf vector back to named parameters, in entry order.
template <typename S>
TapedParams map_vars(const ParamSet<S>& set, const std::vector<Var>& vars, std::size_t& cursor) {
    TapedParams out;
    for (const auto& e : set.entries()) {
        if (!e.trainable) continue;
        out.vars.emplace(e.name, vars.at(cursor++));
    }
    return out;
}

// Generic parameter values for the stack check. The training init keeps
// biases at exactly zero, which lets relu-killed patches ride through zero
//-bias convolutions as bitwise zeros and park downstream activations right
// on their kink; random draws keep every pre-activation generic.
inline Tensor<double> draw_stack_param(Prng& p, const std::string& name, const Shape& shape) {
    const bool is_gamma = name.size() > 6 && name.compare(name.size() - 6, 6, ".gamma") == 0;
    return is_gamma ? prng_uniform<double>(p, shape, 0.5, 1.5)
                    : prng_uniform<double>(p, shape, -0.3, 0.3);
}

inline GradSuiteCase run_model_stack_case(Prng& prng) {
    auto gen = std::make_shared<GeneratorParams<double>>();
    auto disc = std::make_shared<DiscriminatorParams<double>>();
    {
        Prng build_prng = prng.split(101);
        *gen = build_generator<double>(reduced_generator_spec(), build_prng);
        *disc = build_discriminator<double>(reduced_discriminator_spec(), build_prng);
    }
    const int tile = gen->spec.tile_h;
    Prng mask_prng = prng.split(102);
    auto mask = std::make_shared<MaskBatch>(random_mask(mask_prng, 1, tile, tile, true));

    // Leaf order: generator trainables, discriminator trainables, then the
    // real-image batch and the noise draw (input gradients checked too).
    DrawFn draw = [gen, disc, tile](Prng& p) {
        std::vector<Tensor<double>> params;
        for (const auto& e : gen->params.entries())
            if (e.trainable) params.push_back(draw_stack_param(p, e.name, e.value.shape()));
        for (const auto& e : disc->params.entries())
            if (e.trainable) params.push_back(draw_stack_param(p, e.name, e.value.shape()));
        params.push_back(prng_uniform<double>(p, Shape{1, 1, tile, tile}, -1.0, 1.0));
        params.push_back(prng_uniform<double>(p, Shape{1, gen->spec.noise_dim}, -1.0, 1.0));
        return params;
    };

    BuildD build = [gen, disc, mask](Tape<double>& tape, const std::vector<Var>& vars) {
        std::size_t cursor = 0;
        TapedParams gvars = map_vars(gen->params, vars, cursor);
        TapedParams dvars = map_vars(disc->params, vars, cursor);
        Var x = vars.at(cursor++);
        Var z = vars.at(cursor++);

        Var fake = generator_forward(tape, *gen, gvars, z, NormMode::Train);
        Var real_logits = discriminator_forward(tape, *disc, dvars, x, NormMode::Train);
        Var fake_logits = discriminator_forward(tape, *disc, dvars, fake, NormMode::Train);

        Var sup = supervised_loss(tape, real_logits, *mask);
        Var g = generator_loss(tape, fake_logits);
        return add(tape, sup, g);
    };

    // Denominator floor 1e-6: the stack has genuinely dead coordinates
    // (ignored mask pixels, relu-killed paths) whose analytic gradient is an
    // exact zero while the central difference returns cancellation noise.
    Prng case_prng = prng.split(103);
    return run_case("generator+discriminator stack", draw, build, case_prng, 1e-5, 1e-4, 1e-6);
}

} // namespace detail

inline GradSuiteReport run_gradient_suite(std::uint64_t seed) {
    GradSuiteReport report;
    Prng root(seed);
    std::uint64_t salt = 0;
    auto add_case = [&](const std::string& name, const detail::DrawFn& draw,
                        const detail::BuildD& build, double epsilon = 1e-4,
                        double kink_band = 1e-3) {
        Prng case_prng = root.split(++salt);
        report.cases.push_back(detail::run_case(name, draw, build, case_prng, epsilon, kink_band));
    };

    auto draw_one = [](Shape shape, double lo = -2.0, double hi = 2.0) {
        return [shape, lo, hi](Prng& p) {
            return std::vector<Tensor<double>>{prng_uniform<double>(p, shape, lo, hi)};
        };
    };

    // conv2d: input, kernels, bias.
    add_case(
        "conv2d",
        [](Prng& p) {
            return std::vector<Tensor<double>>{
                prng_uniform<double>(p, Shape{2, 3, 5, 6}, -2.0, 2.0),
                prng_uniform<double>(p, Shape{4, 3, 3, 3}, -1.0, 1.0),
                prng_uniform<double>(p, Shape{4}, -1.0, 1.0)};
        },
        [](Tape<double>& t, const std::vector<Var>& v) {
            return mean(t, conv2d(t, v[0], v[1], v[2], 2, 1));
        });

    // conv2d_transpose: input, kernels, bias.
    add_case(
        "conv2d_transpose",
        [](Prng& p) {
            return std::vector<Tensor<double>>{
                prng_uniform<double>(p, Shape{2, 3, 4, 5}, -2.0, 2.0),
                prng_uniform<double>(p, Shape{3, 4, 4, 4}, -1.0, 1.0),
                prng_uniform<double>(p, Shape{4}, -1.0, 1.0)};
        },
        [](Tape<double>& t, const std::vector<Var>& v) {
            return mean(t, conv2d_transpose(t, v[0], v[1], v[2], 2, 1));
        });

    // batch_norm, train and infer modes: input, gamma, beta.
    auto bn_draw = [](Prng& p) {
        return std::vector<Tensor<double>>{prng_uniform<double>(p, Shape{2, 3, 4, 4}, -2.0, 2.0),
                                           prng_uniform<double>(p, Shape{3}, 0.5, 1.5),
                                           prng_uniform<double>(p, Shape{3}, -0.5, 0.5)};
    };
    add_case("batch_norm train", bn_draw, [](Tape<double>& t, const std::vector<Var>& v) {
        Var y = batch_norm(t, v[0], v[1], v[2], static_cast<Tensor<double>*>(nullptr),
                           static_cast<Tensor<double>*>(nullptr), NormMode::Train);
        return mean(t, tanh(t, y)); // tanh keeps the composite non-linear
    });
    add_case("batch_norm infer", bn_draw, [](Tape<double>& t, const std::vector<Var>& v) {
        Tensor<double> running_mean(Shape{3}, {0.1, -0.2, 0.3});
        Tensor<double> running_var = Tensor<double>::full(Shape{3}, 1.5);
        Var y = batch_norm(t, v[0], v[1], v[2], &running_mean, &running_var, NormMode::Infer);
        return mean(t, tanh(t, y));
    });

    // Activations.
    add_case("relu", draw_one(Shape{2, 3, 4, 4}), [](Tape<double>& t, const std::vector<Var>& v) {
        return mean(t, relu(t, v[0]));
    });
    add_case("leaky_relu", draw_one(Shape{2, 3, 4, 4}),
             [](Tape<double>& t, const std::vector<Var>& v) {
                 return mean(t, leaky_relu(t, v[0], 0.2));
             });
    add_case("tanh", draw_one(Shape{2, 3, 4, 4}), [](Tape<double>& t, const std::vector<Var>& v) {
        return mean(t, tanh(t, v[0]));
    });

    // softmax_channels, contracted against fixed weights so every channel of
    // the Jacobian is exercised.
    add_case("softmax_channels", draw_one(Shape{1, 4, 3, 3}),
             [](Tape<double>& t, const std::vector<Var>& v) {
                 Prng wp(7);
                 Var w = t.constant(prng_uniform<double>(wp, Shape{1, 4, 3, 3}, -1.0, 1.0));
                 return sum(t, mul(t, softmax_channels(t, v[0]), w));
             });

    // Arithmetic and shape ops in one composite graph.
    add_case("add/mul/scale/reshape/sum",
             [](Prng& p) {
                 return std::vector<Tensor<double>>{
                     prng_uniform<double>(p, Shape{2, 3, 2, 2}, -2.0, 2.0),
                     prng_uniform<double>(p, Shape{2, 3, 2, 2}, -2.0, 2.0)};
             },
             [](Tape<double>& t, const std::vector<Var>& v) {
                 Var a = reshape(t, v[0], Shape{2, 12});
                 Var b = reshape(t, v[1], Shape{2, 12});
                 Var c = add(t, a, scale(t, mul(t, a, b), 0.5));
                 return sum(t, c);
             });

    // Losses over random 1x4x4x4 logits.
    auto logits_draw = draw_one(Shape{1, kLogitChannels, 4, 4});
    {
        Prng mask_prng = root.split(++salt);
        auto mask = std::make_shared<MaskBatch>(detail::random_mask(mask_prng, 1, 4, 4, true));
        add_case("supervised_loss", logits_draw,
                 [mask](Tape<double>& t, const std::vector<Var>& v) {
                     return supervised_loss(t, v[0], *mask);
                 });
    }
    add_case("unsupervised_real_loss", logits_draw,
             [](Tape<double>& t, const std::vector<Var>& v) {
                 return unsupervised_real_loss(t, v[0]);
             });
    add_case("unsupervised_fake_loss", logits_draw,
             [](Tape<double>& t, const std::vector<Var>& v) {
                 return unsupervised_fake_loss(t, v[0]);
             });
    add_case("generator_loss", logits_draw, [](Tape<double>& t, const std::vector<Var>& v) {
        return generator_loss(t, v[0]);
    });

    // Whole reduced model stack.
    {
        Prng stack_prng = root.split(++salt);
        report.cases.push_back(detail::run_model_stack_case(stack_prng));
    }

    return report;
}

} // namespace ssgan
