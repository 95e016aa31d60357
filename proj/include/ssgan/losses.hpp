#pragma once

// The semi-supervised adversarial objective over (N, 4, H, W) pixel logits:
// supervised cross-entropy on labeled pixels over the three real classes,
// an unsupervised real term -log(1 - p_fake) on real batches, a fake term
// -log(p_fake) on generated batches, and the non-saturating generator
// objective -log(1 - p_fake) on generated batches.

#include <cmath>
#include <memory>

#include "ssgan/classes.hpp"
#include "ssgan/errors.hpp"
#include "ssgan/tape.hpp"
#include "ssgan/tensor.hpp"

namespace ssgan {

// Probabilities are floored here before any log so every loss term stays
// finite at saturation; 1e-7 sits below 32-bit softmax resolution near 1.
inline constexpr double kProbFloor = 1e-7;

struct LossBreakdown {
    float sup = 0;
    float unsup_real = 0;
    float unsup_fake = 0;
    float d_total = 0;
    float g_loss = 0;
};

namespace detail {

template <typename S>
void check_logits(const Tensor<S>& logits) {
    if (logits.shape().rank() != 4 || logits.shape().dim(1) != kLogitChannels) {
        throw ShapeError("expected logits of shape (N," + std::to_string(kLogitChannels) +
                         ",H,W), got " + logits.shape().str());
    }
}

// Per-pixel log-sum-exp over all channels and over the real channels only.
struct PixelLse {
    double all;
    double real;
};

template <typename S>
PixelLse pixel_lse(const S* base, std::int64_t plane, std::int64_t p) {
    double mall = static_cast<double>(base[p]);
    for (int c = 1; c < kLogitChannels; ++c)
        mall = std::max(mall, static_cast<double>(base[c * plane + p]));
    double mreal = static_cast<double>(base[p]);
    for (int c = 1; c < kRealClasses; ++c)
        mreal = std::max(mreal, static_cast<double>(base[c * plane + p]));
    double sall = 0, sreal = 0;
    for (int c = 0; c < kLogitChannels; ++c) {
        const double e = std::exp(static_cast<double>(base[c * plane + p]) - mall);
        sall += e;
        if (c < kRealClasses) sreal += std::exp(static_cast<double>(base[c * plane + p]) - mreal);
    }
    return {mall + std::log(sall), mreal + std::log(sreal)};
}

} // namespace detail

// 1 - p_fake per pixel, computed as exp(lse(real) - lse(all)).
template <typename S>
Tensor<S> real_prob(const Tensor<S>& logits) {
    detail::check_logits(logits);
    const int n = logits.shape().dim(0);
    const int h = logits.shape().dim(2), w = logits.shape().dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    Tensor<S> out(Shape{n, h, w});
    for (int in = 0; in < n; ++in) {
        const S* base = logits.data() + static_cast<std::int64_t>(in) * kLogitChannels * plane;
        S* dst = out.data() + static_cast<std::int64_t>(in) * plane;
        for (std::int64_t p = 0; p < plane; ++p) {
            auto lse = detail::pixel_lse(base, plane, p);
            dst[p] = static_cast<S>(std::exp(lse.real - lse.all));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Supervised pixel cross-entropy, mean over labeled pixels; 255 ignored.

template <typename S>
Var supervised_loss(Tape<S>& tape, Var logits, const MaskBatch& mask) {
    const Tensor<S>& x = tape.value(logits);
    detail::check_logits(x);
    const int n = x.shape().dim(0), h = x.shape().dim(2), w = x.shape().dim(3);
    if (mask.n != n || mask.h != h || mask.w != w) {
        throw ShapeError("mask batch extents do not match logits " + x.shape().str());
    }
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;

    std::int64_t labeled = 0;
    double acc = 0;
    for (int in = 0; in < n; ++in) {
        const S* base = x.data() + static_cast<std::int64_t>(in) * kLogitChannels * plane;
        for (std::int64_t p = 0; p < plane; ++p) {
            const std::uint8_t cls = mask.values[static_cast<std::size_t>(in) * plane + p];
            if (cls == kLabelIgnore) continue;
            if (cls >= kRealClasses) {
                throw ContractError("supervised label " + std::to_string(int(cls)) +
                                    " outside the real classes");
            }
            auto lse = detail::pixel_lse(base, plane, p);
            acc += lse.all - static_cast<double>(base[cls * plane + p]);
            ++labeled;
        }
    }
    if (labeled == 0) {
        throw ContractError("supervised_loss: every pixel in the batch is marked ignore");
    }
    const double inv = 1.0 / static_cast<double>(labeled);

    auto mask_copy = std::make_shared<MaskBatch>(mask);
    return tape.append(
        "supervised_loss", {logits}, Tensor<S>::scalar(static_cast<S>(acc * inv)),
        tape.requires_grad(logits), [mask_copy, inv](Tape<S>& t, int self) {
            const Tensor<S>& lx = t.node_value(t.input(self, 0));
            const int bn = lx.shape().dim(0);
            const std::int64_t bplane =
                static_cast<std::int64_t>(lx.shape().dim(2)) * lx.shape().dim(3);
            const S up = t.node_grad(self)[0];
            Tensor<S> dx(lx.shape());
            for (int in = 0; in < bn; ++in) {
                const S* base = lx.data() + static_cast<std::int64_t>(in) * kLogitChannels * bplane;
                S* dst = dx.data() + static_cast<std::int64_t>(in) * kLogitChannels * bplane;
                for (std::int64_t p = 0; p < bplane; ++p) {
                    const std::uint8_t cls =
                        mask_copy->values[static_cast<std::size_t>(in) * bplane + p];
                    if (cls == kLabelIgnore) continue;
                    auto lse = detail::pixel_lse(base, bplane, p);
                    for (int c = 0; c < kLogitChannels; ++c) {
                        const double prob =
                            std::exp(static_cast<double>(base[c * bplane + p]) - lse.all);
                        const double delta = (c == int(cls)) ? 1.0 : 0.0;
                        dst[c * bplane + p] +=
                            up * static_cast<S>((prob - delta) * inv);
                    }
                }
            }
            t.accumulate(t.input(self, 0), dx);
        });
}

namespace detail {

// Shared core of the real-probability losses: -mean log(1 - p_fake) when
// toward_real, -mean log(p_fake) otherwise, floored at kProbFloor.
template <typename S>
Var prob_loss(Tape<S>& tape, Var logits, bool toward_real, const char* op) {
    const Tensor<S>& x = tape.value(logits);
    check_logits(x);
    const int n = x.shape().dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(x.shape().dim(2)) * x.shape().dim(3);
    const std::int64_t count = static_cast<std::int64_t>(n) * plane;
    const double cap = -std::log(kProbFloor);

    double acc = 0;
    for (int in = 0; in < n; ++in) {
        const S* base = x.data() + static_cast<std::int64_t>(in) * kLogitChannels * plane;
        for (std::int64_t p = 0; p < plane; ++p) {
            auto lse = pixel_lse(base, plane, p);
            const double term = toward_real
                                    ? lse.all - lse.real
                                    : lse.all - static_cast<double>(base[kFakeChannel * plane + p]);
            tape.note_kink_distance(std::abs(cap - term)); // probability-floor clamp
            acc += std::min(term, cap);
        }
    }
    const double inv = 1.0 / static_cast<double>(count);

    return tape.append(
        op, {logits}, Tensor<S>::scalar(static_cast<S>(acc * inv)), tape.requires_grad(logits),
        [toward_real, inv, cap](Tape<S>& t, int self) {
            const Tensor<S>& lx = t.node_value(t.input(self, 0));
            const int bn = lx.shape().dim(0);
            const std::int64_t bplane =
                static_cast<std::int64_t>(lx.shape().dim(2)) * lx.shape().dim(3);
            const S up = t.node_grad(self)[0];
            Tensor<S> dx(lx.shape());
            for (int in = 0; in < bn; ++in) {
                const S* base = lx.data() + static_cast<std::int64_t>(in) * kLogitChannels * bplane;
                S* dst = dx.data() + static_cast<std::int64_t>(in) * kLogitChannels * bplane;
                for (std::int64_t p = 0; p < bplane; ++p) {
                    auto lse = pixel_lse(base, bplane, p);
                    const double term =
                        toward_real ? lse.all - lse.real
                                    : lse.all - static_cast<double>(base[kFakeChannel * bplane + p]);
                    if (term >= cap) continue; // floored pixel: flat
                    for (int c = 0; c < kLogitChannels; ++c) {
                        const double pall =
                            std::exp(static_cast<double>(base[c * bplane + p]) - lse.all);
                        double target;
                        if (toward_real) {
                            target = (c < kRealClasses)
                                         ? std::exp(static_cast<double>(base[c * bplane + p]) -
                                                    lse.real)
                                         : 0.0;
                        } else {
                            target = (c == kFakeChannel) ? 1.0 : 0.0;
                        }
                        dst[c * bplane + p] += up * static_cast<S>((pall - target) * inv);
                    }
                }
            }
            t.accumulate(t.input(self, 0), dx);
        });
}

} // namespace detail

// -mean log(1 - p_fake) on a real (unlabeled) batch.
template <typename S>
Var unsupervised_real_loss(Tape<S>& tape, Var logits) {
    return detail::prob_loss(tape, logits, true, "unsup_real_loss");
}

// -mean log(p_fake) on a generated batch; equals pixel cross-entropy to the
// fake class.
template <typename S>
Var unsupervised_fake_loss(Tape<S>& tape, Var logits) {
    return detail::prob_loss(tape, logits, false, "unsup_fake_loss");
}

// Non-saturating generator objective: -mean log(1 - p_fake) on generated
// logits. Same formula as the unsupervised real term, evaluated on fakes.
template <typename S>
Var generator_loss(Tape<S>& tape, Var logits) {
    return detail::prob_loss(tape, logits, true, "generator_loss");
}

// d_total = sup + lambda_u * (unsup_real + unsup_fake). With lambda_u == 0 the
// unsupervised branch is dropped from the graph entirely so a pure supervised
// step is reproduced bit for bit.
template <typename S>
Var discriminator_loss(Tape<S>& tape, Var sup, Var unsup_real, Var unsup_fake, S lambda_u) {
    if (!(lambda_u >= S(0))) throw ConfigError("lambda_u must be non-negative");
    if (lambda_u == S(0)) return sup;
    Var unsup = add(tape, unsup_real, unsup_fake);
    return add(tape, sup, scale(tape, unsup, lambda_u));
}

// Scalar-side combine for reporting.
template <typename S>
S discriminator_loss(S sup, S unsup_real, S unsup_fake, S lambda_u) {
    if (!(lambda_u >= S(0))) throw ConfigError("lambda_u must be non-negative");
    if (!std::isfinite(static_cast<double>(sup)) ||
        !std::isfinite(static_cast<double>(unsup_real)) ||
        !std::isfinite(static_cast<double>(unsup_fake))) {
        throw NumericError("discriminator_loss: non-finite component");
    }
    return sup + lambda_u * (unsup_real + unsup_fake);
}

} // namespace ssgan
