#pragma once

// Reverse-mode gradient tape. Nodes are appended in execution order, which is
// already topological; backward() walks them in reverse and accumulates into
// per-node gradient buffers. A tape is single-owner: one thread appends, and
// values recorded on it stay valid for the tape's lifetime.

#include <array>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ssgan/errors.hpp"
#include "ssgan/nn_kernels.hpp"
#include "ssgan/tensor.hpp"

namespace ssgan {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

template <typename S>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int self)>;

    Var leaf(Tensor<S> value, bool requires_grad = true) {
        return append("leaf", {}, std::move(value), requires_grad, nullptr);
    }

    Var constant(Tensor<S> value) { return leaf(std::move(value), false); }

    Var append(const char* op, std::initializer_list<Var> inputs, Tensor<S> value,
               bool requires_grad, BackwardFn backward) {
        Node node;
        node.op = op;
        node.n_inputs = 0;
        for (Var v : inputs) {
            if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
                throw ContractError(std::string("tape op '") + op + "' given an input not on this tape");
            }
            node.inputs[node.n_inputs++] = v.id;
        }
        node.value = std::move(value);
        node.requires_grad = requires_grad;
        node.backward = std::move(backward);
        nodes_.push_back(std::move(node));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor<S>& value(Var v) const { return node(v).value; }

    bool requires_grad(Var v) const { return node(v).requires_grad; }

    // Zero for nodes the loss never reached.
    const Tensor<S>& grad(Var v) const {
        const Node& n = node(v);
        if (static_cast<std::size_t>(v.id) >= grads_.size()) {
            throw ContractError("gradients are not available before backward()");
        }
        const Tensor<S>& g = grads_[static_cast<std::size_t>(v.id)];
        if (g.size() == 0) {
            zero_grad_scratch_ = Tensor<S>(n.value.shape());
            return zero_grad_scratch_;
        }
        return g;
    }

    void accumulate(int id, const Tensor<S>& g) {
        if (!nodes_[id].requires_grad) return;
        if (g.shape() != nodes_[id].value.shape()) {
            throw ContractError(std::string("gradient shape ") + g.shape().str() +
                                " does not match value shape " + nodes_[id].value.shape().str() +
                                " at node '" + nodes_[id].op + "'");
        }
        if (grads_[id].size() == 0) {
            grads_[id] = g;
        } else {
            grads_[id].array() += g.array();
        }
    }

    // Reverse-topological accumulation from a scalar loss node.
    void backward(Var loss) {
        if (!node(loss).value.is_scalar()) {
            throw ContractError("backward requires a scalar loss, got shape " +
                                nodes_[loss.id].value.shape().str());
        }
        grads_.assign(nodes_.size(), Tensor<S>());
        grads_[loss.id] = Tensor<S>::full(nodes_[loss.id].value.shape(), S(1));
        for (int id = loss.id; id >= 0; --id) {
            Node& node = nodes_[id];
            if (!node.backward || grads_[id].size() == 0 || !node.requires_grad) continue;
            node.backward(*this, id);
        }
    }

    // Smallest |pre-activation| seen by any relu/leaky op on this tape; the
    // gradient checker redraws inputs when this gets within the kink band.
    double min_kink_distance() const { return min_kink_distance_; }
    void note_kink_distance(double d) { min_kink_distance_ = std::min(min_kink_distance_, d); }

    std::size_t node_count() const { return nodes_.size(); }
    const char* op_name(Var v) const { return node(v).op; }

    int input(int id, int i) const { return nodes_[id].inputs[i]; }
    const Tensor<S>& node_value(int id) const { return nodes_[id].value; }
    const Tensor<S>& node_grad(int id) const { return grads_[id]; }

private:
    struct Node {
        const char* op = "";
        std::array<int, 3> inputs{-1, -1, -1};
        int n_inputs = 0;
        Tensor<S> value;
        bool requires_grad = false;
        BackwardFn backward;
    };

    // Every public accessor goes through here so a Var minted by another tape
    // surfaces as a contract violation, not an out-of-range crash.
    const Node& node(Var v) const {
        if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
            throw ContractError("tape handle #" + std::to_string(v.id) + " is not on this tape");
        }
        return nodes_[static_cast<std::size_t>(v.id)];
    }

    std::vector<Node> nodes_;
    std::vector<Tensor<S>> grads_;
    mutable Tensor<S> zero_grad_scratch_;
    double min_kink_distance_ = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Traced ops. Forward math lives in nn_kernels.hpp; each wrapper records the
// backward rule. Gradients only flow to inputs that require them.

template <typename S>
bool any_requires_grad(const Tape<S>& tape, std::initializer_list<Var> vars) {
    for (Var v : vars)
        if (tape.requires_grad(v)) return true;
    return false;
}

template <typename S>
Var reshape(Tape<S>& tape, Var x, Shape shape) {
    Shape from = tape.value(x).shape();
    Tensor<S> value = tape.value(x).reshaped(shape);
    return tape.append("reshape", {x}, std::move(value), tape.requires_grad(x),
                       [from](Tape<S>& t, int self) {
                           t.accumulate(t.input(self, 0), t.node_grad(self).reshaped(from));
                       });
}

template <typename S>
Var conv2d(Tape<S>& tape, Var input, Var kernels, Var bias, int stride, int padding) {
    Tensor<S> value = conv2d(tape.value(input), tape.value(kernels), tape.value(bias),
                             stride, padding);
    bool rg = any_requires_grad(tape, {input, kernels, bias});
    return tape.append("conv2d", {input, kernels, bias}, std::move(value), rg,
                       [stride, padding](Tape<S>& t, int self) {
                           auto g = conv2d_backward(t.node_value(t.input(self, 0)),
                                                    t.node_value(t.input(self, 1)),
                                                    t.node_grad(self), stride, padding);
                           t.accumulate(t.input(self, 0), g.input);
                           t.accumulate(t.input(self, 1), g.kernels);
                           t.accumulate(t.input(self, 2), g.bias);
                       });
}

template <typename S>
Var conv2d_transpose(Tape<S>& tape, Var input, Var kernels, Var bias, int stride, int padding) {
    Tensor<S> value = conv2d_transpose(tape.value(input), tape.value(kernels), tape.value(bias),
                                       stride, padding);
    bool rg = any_requires_grad(tape, {input, kernels, bias});
    return tape.append("conv2d_transpose", {input, kernels, bias}, std::move(value), rg,
                       [stride, padding](Tape<S>& t, int self) {
                           auto g = conv2d_transpose_backward(t.node_value(t.input(self, 0)),
                                                              t.node_value(t.input(self, 1)),
                                                              t.node_grad(self), stride, padding);
                           t.accumulate(t.input(self, 0), g.input);
                           t.accumulate(t.input(self, 1), g.kernels);
                           t.accumulate(t.input(self, 2), g.bias);
                       });
}

// Train mode updates caller-owned running statistics in place when given.
template <typename S>
Var batch_norm(Tape<S>& tape, Var input, Var gamma, Var beta, Tensor<S>* running_mean,
               Tensor<S>* running_var, NormMode mode) {
    if (mode == NormMode::Train) {
        BatchNormCache<S> cache;
        Tensor<S> value = batch_norm_train(tape.value(input), tape.value(gamma), tape.value(beta),
                                           running_mean, running_var, &cache);
        bool rg = any_requires_grad(tape, {input, gamma, beta});
        return tape.append(
            "batch_norm", {input, gamma, beta}, std::move(value), rg,
            [cache = std::move(cache)](Tape<S>& t, int self) {
                auto g = batch_norm_train_backward(t.node_grad(self),
                                                   t.node_value(t.input(self, 1)), cache);
                t.accumulate(t.input(self, 0), g.input);
                t.accumulate(t.input(self, 1), g.gamma);
                t.accumulate(t.input(self, 2), g.beta);
            });
    }
    if (!running_mean || !running_var) {
        throw ContractError("batch_norm infer mode requires running statistics");
    }
    Tensor<S> value = batch_norm_infer(tape.value(input), tape.value(gamma), tape.value(beta),
                                       *running_mean, *running_var);
    bool rg = any_requires_grad(tape, {input, gamma, beta});
    return tape.append(
        "batch_norm_infer", {input, gamma, beta}, std::move(value), rg,
        [mean = *running_mean, var = *running_var](Tape<S>& t, int self) {
            auto g = batch_norm_infer_backward(t.node_grad(self), t.node_value(t.input(self, 0)),
                                               t.node_value(t.input(self, 1)), mean, var);
            t.accumulate(t.input(self, 0), g.input);
            t.accumulate(t.input(self, 1), g.gamma);
            t.accumulate(t.input(self, 2), g.beta);
        });
}

template <typename S>
Var activation(Tape<S>& tape, Var x, Activation kind, S alpha = S(0.2)) {
    const Tensor<S>& in = tape.value(x);
    if (kind != Activation::Tanh && in.size() > 0) {
        tape.note_kink_distance(static_cast<double>(in.array().abs().minCoeff()));
    }
    Tensor<S> value = activation_forward(in, kind, alpha);
    return tape.append("activation", {x}, std::move(value), tape.requires_grad(x),
                       [kind, alpha](Tape<S>& t, int self) {
                           t.accumulate(t.input(self, 0),
                                        activation_backward(t.node_grad(self),
                                                            t.node_value(t.input(self, 0)),
                                                            t.node_value(self), kind, alpha));
                       });
}

template <typename S>
Var relu(Tape<S>& tape, Var x) { return activation(tape, x, Activation::Relu); }

template <typename S>
Var leaky_relu(Tape<S>& tape, Var x, S alpha = S(0.2)) {
    return activation(tape, x, Activation::LeakyRelu, alpha);
}

template <typename S>
Var tanh(Tape<S>& tape, Var x) { return activation(tape, x, Activation::Tanh); }

template <typename S>
Var softmax_channels(Tape<S>& tape, Var logits) {
    Tensor<S> value = softmax_channels(tape.value(logits));
    return tape.append("softmax_channels", {logits}, std::move(value), tape.requires_grad(logits),
                       [](Tape<S>& t, int self) {
                           t.accumulate(t.input(self, 0),
                                        softmax_channels_backward(t.node_grad(self),
                                                                  t.node_value(self)));
                       });
}

template <typename S>
Var add(Tape<S>& tape, Var a, Var b) {
    const Tensor<S>& ta = tape.value(a);
    const Tensor<S>& tb = tape.value(b);
    require_same_shape(ta, tb, "add");
    Tensor<S> value(ta.shape());
    value.array() = ta.array() + tb.array();
    return tape.append("add", {a, b}, std::move(value), any_requires_grad(tape, {a, b}),
                       [](Tape<S>& t, int self) {
                           t.accumulate(t.input(self, 0), t.node_grad(self));
                           t.accumulate(t.input(self, 1), t.node_grad(self));
                       });
}

template <typename S>
Var mul(Tape<S>& tape, Var a, Var b) {
    const Tensor<S>& ta = tape.value(a);
    const Tensor<S>& tb = tape.value(b);
    require_same_shape(ta, tb, "mul");
    Tensor<S> value(ta.shape());
    value.array() = ta.array() * tb.array();
    return tape.append("mul", {a, b}, std::move(value), any_requires_grad(tape, {a, b}),
                       [](Tape<S>& t, int self) {
                           Tensor<S> da(t.node_grad(self).shape());
                           da.array() = t.node_grad(self).array() *
                                        t.node_value(t.input(self, 1)).array();
                           t.accumulate(t.input(self, 0), da);
                           Tensor<S> db(t.node_grad(self).shape());
                           db.array() = t.node_grad(self).array() *
                                        t.node_value(t.input(self, 0)).array();
                           t.accumulate(t.input(self, 1), db);
                       });
}

template <typename S>
Var scale(Tape<S>& tape, Var x, S factor) {
    Tensor<S> value(tape.value(x).shape());
    value.array() = tape.value(x).array() * factor;
    return tape.append("scale", {x}, std::move(value), tape.requires_grad(x),
                       [factor](Tape<S>& t, int self) {
                           Tensor<S> dx(t.node_grad(self).shape());
                           dx.array() = t.node_grad(self).array() * factor;
                           t.accumulate(t.input(self, 0), dx);
                       });
}

template <typename S>
Var sum(Tape<S>& tape, Var x) {
    Tensor<S> value = Tensor<S>::scalar(tape.value(x).array().sum());
    return tape.append("sum", {x}, std::move(value), tape.requires_grad(x),
                       [](Tape<S>& t, int self) {
                           const S g = t.node_grad(self)[0];
                           t.accumulate(t.input(self, 0),
                                        Tensor<S>::full(t.node_value(t.input(self, 0)).shape(), g));
                       });
}

template <typename S>
Var mean(Tape<S>& tape, Var x) {
    const std::int64_t count = tape.value(x).size();
    Tensor<S> value = Tensor<S>::scalar(static_cast<S>(tape.value(x).array().sum() /
                                                       static_cast<S>(count)));
    return tape.append("mean", {x}, std::move(value), tape.requires_grad(x),
                       [count](Tape<S>& t, int self) {
                           const S g = t.node_grad(self)[0] / static_cast<S>(count);
                           t.accumulate(t.input(self, 0),
                                        Tensor<S>::full(t.node_value(t.input(self, 0)).shape(), g));
                       });
}

} // namespace ssgan
