#pragma once

// Central finite-difference verification of tape gradients. The check runs
// the forward at the tensor scalar type; instantiate with double to verify at
// 64-bit precision regardless of the 32-bit training storage.

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "ssgan/errors.hpp"
#include "ssgan/tape.hpp"
#include "ssgan/tensor.hpp"

namespace ssgan {

struct GradCheckReport {
    double max_rel_error = 0.0;
    int worst_param = -1;
    std::int64_t worst_coord = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

namespace detail {

template <typename S, typename BuildFn>
S eval_loss(BuildFn&& build, const std::vector<Tensor<S>>& params, double* kink_distance) {
    Tape<S> tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.leaf(p, false));
    Var loss = build(tape, vars);
    if (!tape.value(loss).is_scalar()) {
        throw ContractError("finite_diff_check: loss must be scalar");
    }
    if (kink_distance) *kink_distance = tape.min_kink_distance();
    return tape.value(loss)[0];
}

} // namespace detail

// Smallest |pre-activation| any kinked activation sees for these inputs.
// Checks redraw their random inputs when this falls below the kink band.
template <typename S, typename BuildFn>
double probe_kink_distance(BuildFn&& build, const std::vector<Tensor<S>>& params) {
    double d = std::numeric_limits<double>::infinity();
    detail::eval_loss(build, params, &d);
    return d;
}

// build: (Tape<S>&, const std::vector<Var>& params) -> scalar loss Var.
// Returns the worst relative error over every coordinate of every parameter,
// with denominator max(|analytic|, |numeric|, denom_floor). The floor decides
// how near-zero gradients are judged: central differences carry ~1e-11 of
// cancellation noise at double precision, so deep graphs with genuinely dead
// coordinates need a floor well above that noise.
template <typename S, typename BuildFn>
GradCheckReport finite_diff_check(BuildFn&& build, const std::vector<Tensor<S>>& params,
                                  S epsilon, double denom_floor = 1e-8) {
    if (!(epsilon >= S(1e-5) && epsilon <= S(1e-2))) {
        throw ConfigError("finite_diff_check epsilon must lie in [1e-5, 1e-2]");
    }

    // Two identical evaluations must agree bitwise, otherwise central
    // differences are meaningless.
    const S l0 = detail::eval_loss(build, params, nullptr);
    const S l1 = detail::eval_loss(build, params, nullptr);
    if (std::memcmp(&l0, &l1, sizeof(S)) != 0) {
        throw OracleError("finite_diff_check: function is not deterministic (" +
                          std::to_string(static_cast<double>(l0)) + " vs " +
                          std::to_string(static_cast<double>(l1)) + ")");
    }

    // Analytic gradients from one taped run.
    std::vector<Tensor<S>> analytic;
    {
        Tape<S> tape;
        std::vector<Var> vars;
        for (const auto& p : params) vars.push_back(tape.leaf(p, true));
        Var loss = build(tape, vars);
        if (!tape.value(loss).is_scalar()) {
            throw ContractError("finite_diff_check: loss must be scalar");
        }
        tape.backward(loss);
        for (Var v : vars) analytic.push_back(tape.grad(v));
    }

    GradCheckReport report;
    std::vector<Tensor<S>> work = params;
    for (std::size_t pi = 0; pi < work.size(); ++pi) {
        for (std::int64_t i = 0; i < work[pi].size(); ++i) {
            const S saved = work[pi][i];
            work[pi][i] = saved + epsilon;
            const S lplus = detail::eval_loss(build, work, nullptr);
            work[pi][i] = saved - epsilon;
            const S lminus = detail::eval_loss(build, work, nullptr);
            work[pi][i] = saved;

            const double numeric = (static_cast<double>(lplus) - static_cast<double>(lminus)) /
                                   (2.0 * static_cast<double>(epsilon));
            const double a = static_cast<double>(analytic[pi][i]);
            const double denom = std::max({std::fabs(a), std::fabs(numeric), denom_floor});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = static_cast<int>(pi);
                report.worst_coord = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

} // namespace ssgan
