#pragma once

// Plain (untaped) forward and backward math for the layer primitives. The
// autodiff tape in tape.hpp wraps these; tests exercise them directly against
// independent oracles.
//
// Convention: cross-correlation (no kernel flip). conv2d kernels are laid out
// (F, C, kH, kW); conv2d_transpose kernels (Cin, Cout, kH, kW). Convolutions
// are lowered to one GEMM per batch via im2col / col2im.

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <string>

#include "ssgan/errors.hpp"
#include "ssgan/tensor.hpp"

namespace ssgan {

enum class Activation { Relu, LeakyRelu, Tanh };

inline int conv_out_extent(int in, int k, int stride, int padding, const char* axis) {
    if (stride < 1) throw ConfigError("stride must be positive");
    if (padding < 0) throw ConfigError("padding must be non-negative");
    if (in + 2 * padding < k) {
        throw ConfigError(std::string("zero-size convolution output along ") + axis +
                          ": extent " + std::to_string(in) + " + 2*" + std::to_string(padding) +
                          " < kernel " + std::to_string(k));
    }
    return (in + 2 * padding - k) / stride + 1;
}

inline int conv_transpose_out_extent(int in, int k, int stride, int padding, const char* axis) {
    if (stride < 1) throw ConfigError("stride must be positive");
    if (padding < 0) throw ConfigError("padding must be non-negative");
    int out = (in - 1) * stride - 2 * padding + k;
    if (out < 1) {
        throw ConfigError(std::string("non-positive transposed-convolution output along ") +
                          axis + ": " + std::to_string(out));
    }
    return out;
}

namespace detail {

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatCM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

// Patch matrix: rows (c, ki, kj), one column per (n, gh, gw) grid position.
// Grid position (gh, gw) reads image pixels (gh*stride - pad + ki, ...).
template <typename S>
MatCM<S> im2col(const S* img, int n, int c, int h, int w, int kh, int kw, int stride,
                int pad, int grid_h, int grid_w) {
    MatCM<S> cols(static_cast<std::int64_t>(c) * kh * kw,
                  static_cast<std::int64_t>(n) * grid_h * grid_w);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    std::int64_t col_idx = 0;
    for (int in = 0; in < n; ++in) {
        const S* sample = img + in * c * plane;
        for (int gh = 0; gh < grid_h; ++gh) {
            for (int gw = 0; gw < grid_w; ++gw, ++col_idx) {
                S* dst = cols.col(col_idx).data();
                for (int ic = 0; ic < c; ++ic) {
                    const S* chan = sample + ic * plane;
                    for (int ki = 0; ki < kh; ++ki) {
                        const int ih = gh * stride - pad + ki;
                        if (ih < 0 || ih >= h) {
                            for (int kj = 0; kj < kw; ++kj) *dst++ = S(0);
                            continue;
                        }
                        const S* row = chan + static_cast<std::int64_t>(ih) * w;
                        for (int kj = 0; kj < kw; ++kj) {
                            const int iw = gw * stride - pad + kj;
                            *dst++ = (iw < 0 || iw >= w) ? S(0) : row[iw];
                        }
                    }
                }
            }
        }
    }
    return cols;
}

// Adjoint of im2col: scatter-add patch columns back into the image.
template <typename S>
void col2im_add(const MatCM<S>& cols, S* img, int n, int c, int h, int w, int kh, int kw,
                int stride, int pad, int grid_h, int grid_w) {
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    std::int64_t col_idx = 0;
    for (int in = 0; in < n; ++in) {
        S* sample = img + in * c * plane;
        for (int gh = 0; gh < grid_h; ++gh) {
            for (int gw = 0; gw < grid_w; ++gw, ++col_idx) {
                const S* src = cols.col(col_idx).data();
                for (int ic = 0; ic < c; ++ic) {
                    S* chan = sample + ic * plane;
                    for (int ki = 0; ki < kh; ++ki) {
                        const int ih = gh * stride - pad + ki;
                        if (ih < 0 || ih >= h) {
                            src += kw;
                            continue;
                        }
                        S* row = chan + static_cast<std::int64_t>(ih) * w;
                        for (int kj = 0; kj < kw; ++kj) {
                            const int iw = gw * stride - pad + kj;
                            if (iw >= 0 && iw < w) row[iw] += src[kj];
                        }
                        src += kw;
                    }
                }
            }
        }
    }
}

// (N,C,H,W) tensor -> (C, N*H*W) matrix; row c holds all samples' channel-c planes.
template <typename S>
MatRM<S> channels_to_rows(const Tensor<S>& x, int n, int c, std::int64_t plane) {
    MatRM<S> m(c, n * plane);
    for (int ic = 0; ic < c; ++ic) {
        for (int in = 0; in < n; ++in) {
            std::memcpy(m.data() + (static_cast<std::int64_t>(ic) * n + in) * plane,
                        x.data() + (static_cast<std::int64_t>(in) * c + ic) * plane,
                        sizeof(S) * plane);
        }
    }
    return m;
}

template <typename S>
void rows_to_channels(const MatRM<S>& m, Tensor<S>& x, int n, int c, std::int64_t plane) {
    for (int ic = 0; ic < c; ++ic) {
        for (int in = 0; in < n; ++in) {
            std::memcpy(x.data() + (static_cast<std::int64_t>(in) * c + ic) * plane,
                        m.data() + (static_cast<std::int64_t>(ic) * n + in) * plane,
                        sizeof(S) * plane);
        }
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// conv2d: (N,Cin,H,W) * (F,Cin,kH,kW) -> (N,F,H',W'), cross-correlation.

template <typename S>
void check_conv_input(const Tensor<S>& input, const Tensor<S>& kernels, int kernel_cin_axis) {
    if (input.shape().rank() != 4) {
        throw ShapeError("conv input must be rank 4 (batch,channel,height,width), got " +
                         input.shape().str());
    }
    if (kernels.shape().rank() != 4) {
        throw ShapeError("conv kernels must be rank 4, got " + kernels.shape().str());
    }
    if (kernels.shape().dim(kernel_cin_axis) != input.shape().dim(1)) {
        throw ShapeError("channel axis mismatch: input has " +
                         std::to_string(input.shape().dim(1)) + " channels, kernels expect " +
                         std::to_string(kernels.shape().dim(kernel_cin_axis)));
    }
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& kernels, const Tensor<S>& bias,
                 int stride, int padding) {
    check_conv_input(input, kernels, 1);
    const int n = input.shape().dim(0), cin = input.shape().dim(1);
    const int h = input.shape().dim(2), w = input.shape().dim(3);
    const int f = kernels.shape().dim(0), kh = kernels.shape().dim(2), kw = kernels.shape().dim(3);
    if (bias.size() != f) {
        throw ShapeError("bias axis mismatch: expected " + std::to_string(f) + " values, got " +
                         std::to_string(bias.size()));
    }
    const int ho = conv_out_extent(h, kh, stride, padding, "height");
    const int wo = conv_out_extent(w, kw, stride, padding, "width");

    auto cols = detail::im2col(input.data(), n, cin, h, w, kh, kw, stride, padding, ho, wo);
    Eigen::Map<const detail::MatRM<S>> wm(kernels.data(), f, static_cast<std::int64_t>(cin) * kh * kw);
    detail::MatRM<S> outm = wm * cols; // (F, N*Ho*Wo)

    Tensor<S> out(Shape{n, f, ho, wo});
    const std::int64_t plane = static_cast<std::int64_t>(ho) * wo;
    detail::rows_to_channels(outm, out, n, f, plane);
    for (int in = 0; in < n; ++in)
        for (int of = 0; of < f; ++of) {
            S* dst = out.data() + (static_cast<std::int64_t>(in) * f + of) * plane;
            const S b = bias[of];
            for (std::int64_t i = 0; i < plane; ++i) dst[i] += b;
        }
    return out;
}

template <typename S>
struct ConvGrads {
    Tensor<S> input;
    Tensor<S> kernels;
    Tensor<S> bias;
};

template <typename S>
ConvGrads<S> conv2d_backward(const Tensor<S>& input, const Tensor<S>& kernels,
                             const Tensor<S>& grad_out, int stride, int padding) {
    const int n = input.shape().dim(0), cin = input.shape().dim(1);
    const int h = input.shape().dim(2), w = input.shape().dim(3);
    const int f = kernels.shape().dim(0), kh = kernels.shape().dim(2), kw = kernels.shape().dim(3);
    const int ho = grad_out.shape().dim(2), wo = grad_out.shape().dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(ho) * wo;

    auto dout = detail::channels_to_rows(grad_out, n, f, plane); // (F, N*Ho*Wo)
    Eigen::Map<const detail::MatRM<S>> wm(kernels.data(), f, static_cast<std::int64_t>(cin) * kh * kw);

    ConvGrads<S> g{Tensor<S>(input.shape()), Tensor<S>(kernels.shape()), Tensor<S>(Shape{f})};

    detail::MatCM<S> dcols = wm.transpose() * dout; // (Cin*kh*kw, N*Ho*Wo)
    detail::col2im_add(dcols, g.input.data(), n, cin, h, w, kh, kw, stride, padding, ho, wo);

    auto cols = detail::im2col(input.data(), n, cin, h, w, kh, kw, stride, padding, ho, wo);
    detail::MatRM<S> dwm = dout * cols.transpose(); // (F, Cin*kh*kw)
    Eigen::Map<detail::MatRM<S>>(g.kernels.data(), f, static_cast<std::int64_t>(cin) * kh * kw) = dwm;

    for (int of = 0; of < f; ++of) g.bias[of] = dout.row(of).sum();
    return g;
}

// ---------------------------------------------------------------------------
// conv2d_transpose: (N,Cin,H,W) * (Cin,Cout,kH,kW) -> (N,Cout,H',W') with
// H' = (H-1)*stride - 2*padding + kH. Adjoint of conv2d in its first argument.

template <typename S>
Tensor<S> conv2d_transpose(const Tensor<S>& input, const Tensor<S>& kernels,
                           const Tensor<S>& bias, int stride, int padding) {
    check_conv_input(input, kernels, 0);
    const int n = input.shape().dim(0), cin = input.shape().dim(1);
    const int h = input.shape().dim(2), w = input.shape().dim(3);
    const int cout = kernels.shape().dim(1), kh = kernels.shape().dim(2),
              kw = kernels.shape().dim(3);
    if (bias.size() != cout) {
        throw ShapeError("bias axis mismatch: expected " + std::to_string(cout) +
                         " values, got " + std::to_string(bias.size()));
    }
    const int ho = conv_transpose_out_extent(h, kh, stride, padding, "height");
    const int wo = conv_transpose_out_extent(w, kw, stride, padding, "width");

    const std::int64_t in_plane = static_cast<std::int64_t>(h) * w;
    auto inm = detail::channels_to_rows(input, n, cin, in_plane); // (Cin, N*H*W)
    Eigen::Map<const detail::MatRM<S>> km(kernels.data(), cin,
                                          static_cast<std::int64_t>(cout) * kh * kw);
    detail::MatCM<S> cols = km.transpose() * inm; // (Cout*kh*kw, N*H*W)

    Tensor<S> out(Shape{n, cout, ho, wo});
    detail::col2im_add(cols, out.data(), n, cout, ho, wo, kh, kw, stride, padding, h, w);

    const std::int64_t out_plane = static_cast<std::int64_t>(ho) * wo;
    for (int in = 0; in < n; ++in)
        for (int oc = 0; oc < cout; ++oc) {
            S* dst = out.data() + (static_cast<std::int64_t>(in) * cout + oc) * out_plane;
            const S b = bias[oc];
            for (std::int64_t i = 0; i < out_plane; ++i) dst[i] += b;
        }
    return out;
}

template <typename S>
ConvGrads<S> conv2d_transpose_backward(const Tensor<S>& input, const Tensor<S>& kernels,
                                       const Tensor<S>& grad_out, int stride, int padding) {
    const int n = input.shape().dim(0), cin = input.shape().dim(1);
    const int h = input.shape().dim(2), w = input.shape().dim(3);
    const int cout = kernels.shape().dim(1), kh = kernels.shape().dim(2),
              kw = kernels.shape().dim(3);
    const int ho = grad_out.shape().dim(2), wo = grad_out.shape().dim(3);

    ConvGrads<S> g{Tensor<S>(input.shape()), Tensor<S>(kernels.shape()), Tensor<S>(Shape{cout})};

    // d/d(input) is the plain convolution of grad_out with the same kernels
    // read as (F=Cin, C=Cout, kH, kW); the flat layout already matches.
    auto gcols = detail::im2col(grad_out.data(), n, cout, ho, wo, kh, kw, stride, padding, h, w);
    Eigen::Map<const detail::MatRM<S>> km(kernels.data(), cin,
                                          static_cast<std::int64_t>(cout) * kh * kw);
    detail::MatRM<S> dinm = km * gcols; // (Cin, N*H*W)
    detail::rows_to_channels(dinm, g.input, n, cin, static_cast<std::int64_t>(h) * w);

    // d/d(kernels): patches of grad_out against the input activations.
    auto inm = detail::channels_to_rows(input, n, cin, static_cast<std::int64_t>(h) * w);
    detail::MatRM<S> dkm = inm * gcols.transpose(); // (Cin, Cout*kh*kw)
    Eigen::Map<detail::MatRM<S>>(g.kernels.data(), cin,
                                 static_cast<std::int64_t>(cout) * kh * kw) = dkm;

    const std::int64_t out_plane = static_cast<std::int64_t>(ho) * wo;
    for (int oc = 0; oc < cout; ++oc) {
        S acc = S(0);
        for (int in = 0; in < n; ++in) {
            const S* src = grad_out.data() + (static_cast<std::int64_t>(in) * cout + oc) * out_plane;
            for (std::int64_t i = 0; i < out_plane; ++i) acc += src[i];
        }
        g.bias[oc] = acc;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Batch normalization over (N,H,W) per channel. eps_bn = 1e-5, running
// momentum 0.9 (running = 0.9*running + 0.1*batch).

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

enum class NormMode { Train, Infer };

template <typename S>
struct BatchNormCache {
    Tensor<S> xhat;   // normalized pre-affine activations
    Tensor<S> invstd; // per-channel 1/sqrt(var+eps)
};

template <typename S>
void check_batch_norm_args(const Tensor<S>& input, const Tensor<S>& gamma, const Tensor<S>& beta) {
    if (input.shape().rank() != 4) {
        throw ShapeError("batch_norm input must be rank 4, got " + input.shape().str());
    }
    const int c = input.shape().dim(1);
    if (gamma.size() != c || beta.size() != c) {
        throw ShapeError("batch_norm affine parameters must have one value per channel (" +
                         std::to_string(c) + ")");
    }
}

// Train mode. Normalizes with batch statistics; if running_mean/var are given
// they are updated in place (caller-owned state).
template <typename S>
Tensor<S> batch_norm_train(const Tensor<S>& input, const Tensor<S>& gamma, const Tensor<S>& beta,
                           Tensor<S>* running_mean, Tensor<S>* running_var,
                           BatchNormCache<S>* cache) {
    check_batch_norm_args(input, gamma, beta);
    const int n = input.shape().dim(0), c = input.shape().dim(1);
    const int h = input.shape().dim(2), w = input.shape().dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t m = static_cast<std::int64_t>(n) * plane;
    if (m < 2) {
        throw ConfigError("batch_norm train mode needs at least 2 values per channel, got " +
                          std::to_string(m));
    }

    Tensor<S> out(input.shape());
    Tensor<S> xhat(input.shape());
    Tensor<S> invstd(Shape{c});

    for (int ic = 0; ic < c; ++ic) {
        double mean = 0;
        for (int in = 0; in < n; ++in) {
            const S* src = input.data() + (static_cast<std::int64_t>(in) * c + ic) * plane;
            for (std::int64_t i = 0; i < plane; ++i) mean += static_cast<double>(src[i]);
        }
        mean /= static_cast<double>(m);
        double var = 0;
        for (int in = 0; in < n; ++in) {
            const S* src = input.data() + (static_cast<std::int64_t>(in) * c + ic) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                const double d = static_cast<double>(src[i]) - mean;
                var += d * d;
            }
        }
        var /= static_cast<double>(m);

        const S istd = static_cast<S>(1.0 / std::sqrt(var + kBatchNormEps));
        invstd[ic] = istd;
        const S g = gamma[ic], b = beta[ic], mu = static_cast<S>(mean);
        for (int in = 0; in < n; ++in) {
            const std::int64_t base = (static_cast<std::int64_t>(in) * c + ic) * plane;
            const S* src = input.data() + base;
            S* xh = xhat.data() + base;
            S* dst = out.data() + base;
            for (std::int64_t i = 0; i < plane; ++i) {
                xh[i] = (src[i] - mu) * istd;
                dst[i] = g * xh[i] + b;
            }
        }
        if (running_mean && running_var) {
            (*running_mean)[ic] = static_cast<S>(kBatchNormMomentum * (*running_mean)[ic] +
                                                 (1.0 - kBatchNormMomentum) * mean);
            (*running_var)[ic] = static_cast<S>(kBatchNormMomentum * (*running_var)[ic] +
                                                (1.0 - kBatchNormMomentum) * var);
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->invstd = std::move(invstd);
    }
    return out;
}

template <typename S>
Tensor<S> batch_norm_infer(const Tensor<S>& input, const Tensor<S>& gamma, const Tensor<S>& beta,
                           const Tensor<S>& running_mean, const Tensor<S>& running_var) {
    check_batch_norm_args(input, gamma, beta);
    const int n = input.shape().dim(0), c = input.shape().dim(1);
    const std::int64_t plane =
        static_cast<std::int64_t>(input.shape().dim(2)) * input.shape().dim(3);
    Tensor<S> out(input.shape());
    for (int ic = 0; ic < c; ++ic) {
        const S istd = static_cast<S>(1.0 / std::sqrt(static_cast<double>(running_var[ic]) +
                                                      kBatchNormEps));
        const S mu = running_mean[ic], g = gamma[ic], b = beta[ic];
        for (int in = 0; in < n; ++in) {
            const std::int64_t base = (static_cast<std::int64_t>(in) * c + ic) * plane;
            const S* src = input.data() + base;
            S* dst = out.data() + base;
            for (std::int64_t i = 0; i < plane; ++i) dst[i] = g * (src[i] - mu) * istd + b;
        }
    }
    return out;
}

template <typename S>
struct BatchNormGrads {
    Tensor<S> input;
    Tensor<S> gamma;
    Tensor<S> beta;
};

template <typename S>
BatchNormGrads<S> batch_norm_train_backward(const Tensor<S>& grad_out, const Tensor<S>& gamma,
                                            const BatchNormCache<S>& cache) {
    const Shape& shape = grad_out.shape();
    const int n = shape.dim(0), c = shape.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(shape.dim(2)) * shape.dim(3);
    const std::int64_t m = static_cast<std::int64_t>(n) * plane;

    BatchNormGrads<S> g{Tensor<S>(shape), Tensor<S>(Shape{c}), Tensor<S>(Shape{c})};
    for (int ic = 0; ic < c; ++ic) {
        double sum_dy = 0, sum_dy_xhat = 0;
        for (int in = 0; in < n; ++in) {
            const std::int64_t base = (static_cast<std::int64_t>(in) * c + ic) * plane;
            const S* dy = grad_out.data() + base;
            const S* xh = cache.xhat.data() + base;
            for (std::int64_t i = 0; i < plane; ++i) {
                sum_dy += static_cast<double>(dy[i]);
                sum_dy_xhat += static_cast<double>(dy[i]) * static_cast<double>(xh[i]);
            }
        }
        g.beta[ic] = static_cast<S>(sum_dy);
        g.gamma[ic] = static_cast<S>(sum_dy_xhat);

        // dx = (gamma*invstd/M) * (M*dy - sum(dy) - xhat*sum(dy*xhat))
        const double k = static_cast<double>(gamma[ic]) * static_cast<double>(cache.invstd[ic]) /
                         static_cast<double>(m);
        for (int in = 0; in < n; ++in) {
            const std::int64_t base = (static_cast<std::int64_t>(in) * c + ic) * plane;
            const S* dy = grad_out.data() + base;
            const S* xh = cache.xhat.data() + base;
            S* dx = g.input.data() + base;
            for (std::int64_t i = 0; i < plane; ++i) {
                dx[i] = static_cast<S>(k * (static_cast<double>(m) * dy[i] - sum_dy -
                                            static_cast<double>(xh[i]) * sum_dy_xhat));
            }
        }
    }
    return g;
}

// Infer mode is an affine map per channel; gradients are diagonal.
template <typename S>
BatchNormGrads<S> batch_norm_infer_backward(const Tensor<S>& grad_out, const Tensor<S>& input,
                                            const Tensor<S>& gamma, const Tensor<S>& running_mean,
                                            const Tensor<S>& running_var) {
    const Shape& shape = grad_out.shape();
    const int n = shape.dim(0), c = shape.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(shape.dim(2)) * shape.dim(3);
    BatchNormGrads<S> g{Tensor<S>(shape), Tensor<S>(Shape{c}), Tensor<S>(Shape{c})};
    for (int ic = 0; ic < c; ++ic) {
        const double istd = 1.0 / std::sqrt(static_cast<double>(running_var[ic]) + kBatchNormEps);
        const double mu = static_cast<double>(running_mean[ic]);
        double sum_dy = 0, sum_dy_xhat = 0;
        for (int in = 0; in < n; ++in) {
            const std::int64_t base = (static_cast<std::int64_t>(in) * c + ic) * plane;
            const S* dy = grad_out.data() + base;
            const S* x = input.data() + base;
            S* dx = g.input.data() + base;
            for (std::int64_t i = 0; i < plane; ++i) {
                sum_dy += static_cast<double>(dy[i]);
                sum_dy_xhat += static_cast<double>(dy[i]) * (static_cast<double>(x[i]) - mu) * istd;
                dx[i] = static_cast<S>(static_cast<double>(gamma[ic]) * istd * dy[i]);
            }
        }
        g.beta[ic] = static_cast<S>(sum_dy);
        g.gamma[ic] = static_cast<S>(sum_dy_xhat);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Elementwise activations. Subgradient choices: relu'(0) = 0, leaky'(0) = alpha.

template <typename S>
Tensor<S> activation_forward(const Tensor<S>& x, Activation kind, S alpha = S(0.2)) {
    if (kind == Activation::LeakyRelu && !(alpha > S(0) && alpha < S(1))) {
        throw ConfigError("leaky_relu slope must lie in (0,1)");
    }
    Tensor<S> y(x.shape());
    switch (kind) {
        case Activation::Relu:
            y.array() = x.array().max(S(0));
            break;
        case Activation::LeakyRelu:
            y.array() = (x.array() > S(0)).select(x.array(), alpha * x.array());
            break;
        case Activation::Tanh:
            y.array() = x.array().tanh();
            break;
    }
    return y;
}

template <typename S>
Tensor<S> activation_backward(const Tensor<S>& grad_out, const Tensor<S>& x, const Tensor<S>& y,
                              Activation kind, S alpha = S(0.2)) {
    Tensor<S> dx(x.shape());
    switch (kind) {
        case Activation::Relu:
            dx.array() = (x.array() > S(0)).select(grad_out.array(), S(0));
            break;
        case Activation::LeakyRelu:
            dx.array() = (x.array() > S(0)).select(grad_out.array(), alpha * grad_out.array());
            break;
        case Activation::Tanh:
            dx.array() = grad_out.array() * (S(1) - y.array().square());
            break;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// softmax over the channel axis, per pixel, with max subtraction.

template <typename S>
Tensor<S> softmax_channels(const Tensor<S>& logits) {
    if (logits.shape().rank() != 4) {
        throw ShapeError("softmax_channels expects rank 4 logits, got " + logits.shape().str());
    }
    const int n = logits.shape().dim(0), k = logits.shape().dim(1);
    if (k < 2) throw ShapeError("softmax_channels needs at least 2 channels");
    const std::int64_t plane =
        static_cast<std::int64_t>(logits.shape().dim(2)) * logits.shape().dim(3);

    Tensor<S> out(logits.shape());
    for (int in = 0; in < n; ++in) {
        const S* x = logits.data() + static_cast<std::int64_t>(in) * k * plane;
        S* y = out.data() + static_cast<std::int64_t>(in) * k * plane;
        for (std::int64_t p = 0; p < plane; ++p) {
            S mx = x[p];
            for (int ic = 1; ic < k; ++ic) mx = std::max(mx, x[ic * plane + p]);
            S denom = S(0);
            for (int ic = 0; ic < k; ++ic) {
                const S e = std::exp(x[ic * plane + p] - mx);
                y[ic * plane + p] = e;
                denom += e;
            }
            for (int ic = 0; ic < k; ++ic) y[ic * plane + p] /= denom;
        }
    }
    return out;
}

template <typename S>
Tensor<S> softmax_channels_backward(const Tensor<S>& grad_out, const Tensor<S>& y) {
    const int n = y.shape().dim(0), k = y.shape().dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(y.shape().dim(2)) * y.shape().dim(3);
    Tensor<S> dx(y.shape());
    for (int in = 0; in < n; ++in) {
        const std::int64_t base = static_cast<std::int64_t>(in) * k * plane;
        const S* dy = grad_out.data() + base;
        const S* yy = y.data() + base;
        S* out = dx.data() + base;
        for (std::int64_t p = 0; p < plane; ++p) {
            S dot = S(0);
            for (int ic = 0; ic < k; ++ic) dot += dy[ic * plane + p] * yy[ic * plane + p];
            for (int ic = 0; ic < k; ++ic)
                out[ic * plane + p] = yy[ic * plane + p] * (dy[ic * plane + p] - dot);
        }
    }
    return dx;
}

} // namespace ssgan
