#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mapnn/tensor.hpp"

namespace mapnn::ad {

template <typename Scalar>
class Var;

/// One vertex of the computation graph. Gradient functions are themselves
/// written in terms of differentiable operations, so running them with
/// recording enabled yields a graph that can be differentiated again.
template <typename Scalar>
struct Node {
    // Receives the adjoint of this node's output and a mask of which inputs
    // need an adjoint; returns one entry per input (undefined when skipped).
    using BackwardFn = std::function<std::vector<Var<Scalar>>(const Var<Scalar>&, const std::vector<bool>&)>;

    Tensor<Scalar> value;
    std::string op;
    std::vector<Var<Scalar>> inputs;
    BackwardFn backward;
    bool requires_grad = false;
};

/// Shared handle to a graph node.
template <typename Scalar>
class Var {
public:
    Var() = default;

    /// A graph leaf. Parameters and differentiation targets pass
    /// requires_grad = true; everything else is a constant.
    static Var leaf(Tensor<Scalar> value, bool requires_grad = false) {
        auto node = std::make_shared<Node<Scalar>>();
        node->value = std::move(value);
        node->op = "leaf";
        node->requires_grad = requires_grad;
        return Var(std::move(node));
    }

    explicit Var(std::shared_ptr<Node<Scalar>> node) : node_(std::move(node)) {}

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Tensor<Scalar>& value() const { return node_->value; }
    Tensor<Scalar>& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
    bool is_leaf() const noexcept { return !node_->backward; }
    const std::string& op() const { return node_->op; }
    Node<Scalar>* node() const noexcept { return node_.get(); }

    friend bool operator==(const Var& a, const Var& b) noexcept { return a.node_ == b.node_; }

private:
    std::shared_ptr<Node<Scalar>> node_;
};

/// Whether operations currently record graph history (per thread).
bool grad_enabled() noexcept;
void set_grad_enabled(bool enabled) noexcept;

class GradModeGuard {
public:
    explicit GradModeGuard(bool enabled) : previous_(grad_enabled()) { set_grad_enabled(enabled); }
    ~GradModeGuard() { set_grad_enabled(previous_); }
    GradModeGuard(const GradModeGuard&) = delete;
    GradModeGuard& operator=(const GradModeGuard&) = delete;

private:
    bool previous_;
};

class NoGradGuard : public GradModeGuard {
public:
    NoGradGuard() : GradModeGuard(false) {}
};

/// Attach `value` to the graph as the output of `op`. Returns a constant leaf
/// when recording is off or no input requires a gradient.
template <typename Scalar>
Var<Scalar> record(Tensor<Scalar> value, std::string op, std::vector<Var<Scalar>> inputs,
                   typename Node<Scalar>::BackwardFn backward) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!any || !grad_enabled()) return Var<Scalar>::leaf(std::move(value));
    auto node = std::make_shared<Node<Scalar>>();
    node->value = std::move(value);
    node->op = std::move(op);
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    node->requires_grad = true;
    return Var<Scalar>(std::move(node));
}

/// Reverse-mode gradients of the scalar `root` with respect to each of `wrt`.
/// With create_graph the returned adjoints are themselves differentiable.
/// Targets that `root` does not depend on receive zeros, or raise when
/// allow_unused is false.
template <typename Scalar>
std::vector<Var<Scalar>> grad(const Var<Scalar>& root, const std::vector<Var<Scalar>>& wrt,
                              bool create_graph = false, bool allow_unused = true);

}  // namespace mapnn::ad
