#include "mapnn/autodiff.hpp"

#include <unordered_map>
#include <unordered_set>

#include "mapnn/ops.hpp"

namespace mapnn::ad {
namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() noexcept { return g_grad_enabled; }
void set_grad_enabled(bool enabled) noexcept { g_grad_enabled = enabled; }

template <typename Scalar>
std::vector<Var<Scalar>> grad(const Var<Scalar>& root, const std::vector<Var<Scalar>>& wrt, bool create_graph,
                              bool allow_unused) {
    using NodePtr = Node<Scalar>*;
    if (!root.defined()) throw InvalidArgument("grad: root is undefined");
    if (root.value().size() != 1) {
        throw ShapeError("grad", "root must be scalar-valued, got shape " + root.shape().str());
    }

    std::unordered_set<NodePtr> targets;
    for (const auto& w : wrt) targets.insert(w.node());

    // Iterative post-order DFS: every node appears after all of its inputs.
    std::vector<NodePtr> order;
    std::unordered_map<NodePtr, bool> leads;
    if (root.requires_grad()) {
        std::unordered_set<NodePtr> visited;
        std::vector<std::pair<NodePtr, std::size_t>> stack{{root.node(), 0}};
        visited.insert(root.node());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->inputs.size()) {
                NodePtr child = node->inputs[next++].node();
                if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
                continue;
            }
            bool reaches = targets.count(node) > 0;
            for (const auto& in : node->inputs) {
                auto it = leads.find(in.node());
                reaches = reaches || (it != leads.end() && it->second);
            }
            leads[node] = reaches;
            order.push_back(node);
            stack.pop_back();
        }
    }

    std::unordered_map<NodePtr, Var<Scalar>> adjoint;
    std::unordered_map<NodePtr, Var<Scalar>> result;
    if (!order.empty() && leads[root.node()]) {
        adjoint[root.node()] = Var<Scalar>::leaf(Tensor<Scalar>::constant(root.shape(), Scalar(1)));
    }

    GradModeGuard mode(create_graph);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodePtr node = *it;
        auto found = adjoint.find(node);
        if (found == adjoint.end()) continue;
        Var<Scalar> g = std::move(found->second);
        adjoint.erase(found);
        if (targets.count(node)) result[node] = g;
        if (!node->backward) continue;

        std::vector<bool> needed(node->inputs.size());
        bool any = false;
        for (std::size_t i = 0; i < needed.size(); ++i) {
            const auto& in = node->inputs[i];
            needed[i] = in.requires_grad() && leads[in.node()];
            any = any || needed[i];
        }
        if (!any) continue;

        std::vector<Var<Scalar>> input_grads = node->backward(g, needed);
        for (std::size_t i = 0; i < needed.size(); ++i) {
            if (!needed[i] || !input_grads[i].defined()) continue;
            NodePtr in = node->inputs[i].node();
            auto slot = adjoint.find(in);
            if (slot == adjoint.end()) {
                adjoint.emplace(in, std::move(input_grads[i]));
            } else if (create_graph) {
                slot->second = add(slot->second, input_grads[i]);
            } else {
                Tensor<Scalar> sum = slot->second.value();
                sum.array() += input_grads[i].value().array();
                slot->second = Var<Scalar>::leaf(std::move(sum));
            }
        }
    }

    std::vector<Var<Scalar>> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) {
        auto it = result.find(w.node());
        if (it != result.end()) {
            out.push_back(it->second);
            continue;
        }
        if (!allow_unused) throw InvalidArgument("grad: differentiation target is not an ancestor of the output");
        out.push_back(Var<Scalar>::leaf(Tensor<Scalar>::zeros(w.shape())));
    }
    return out;
}

template std::vector<Var<float>> grad<float>(const Var<float>&, const std::vector<Var<float>>&, bool, bool);
template std::vector<Var<double>> grad<double>(const Var<double>&, const std::vector<Var<double>>&, bool, bool);

}  // namespace mapnn::ad
