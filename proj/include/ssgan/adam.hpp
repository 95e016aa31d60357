#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "ssgan/errors.hpp"
#include "ssgan/tensor.hpp"

namespace ssgan {

// Paper-quoted learning rate / beta1; beta2 and eps follow the optimizer's
// standard constants.
struct AdamConfig {
    double lr = 0.0002;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename S>
struct AdamState {
    Tensor<S> m;
    Tensor<S> v;
    std::int64_t t = 0;
};

// One bias-corrected Adam update, in place. `name` is carried into the abort
// error when the gradient is non-finite.
template <typename S>
void adam_step(Tensor<S>& param, const Tensor<S>& grad, AdamState<S>& state,
               const AdamConfig& cfg, const std::string& name) {
    if (grad.shape() != param.shape()) {
        throw ShapeError("adam_step(" + name + "): gradient shape " + grad.shape().str() +
                         " does not match parameter shape " + param.shape().str());
    }
    if (!grad.all_finite()) {
        throw NumericError("adam_step aborted: non-finite gradient for parameter '" + name + "'");
    }
    if (state.t == 0 && state.m.size() == 0) {
        state.m = Tensor<S>(param.shape());
        state.v = Tensor<S>(param.shape());
    }
    if (state.m.shape() != param.shape() || state.v.shape() != param.shape()) {
        throw ShapeError("adam_step(" + name + "): moment shape does not match parameter");
    }

    state.t += 1;
    const S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
    state.m.array() = b1 * state.m.array() + (S(1) - b1) * grad.array();
    state.v.array() = b2 * state.v.array() + (S(1) - b2) * grad.array().square();

    const S mhat_scale = static_cast<S>(1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(state.t))));
    const S vhat_scale = static_cast<S>(1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(state.t))));
    param.array() -= static_cast<S>(cfg.lr) * (state.m.array() * mhat_scale) /
                     ((state.v.array() * vhat_scale).sqrt() + static_cast<S>(cfg.eps));
}

} // namespace ssgan
