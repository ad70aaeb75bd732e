#include "mtsr/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>
#include <utility>

#include "mtsr/error.hpp"

namespace mtsr {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

template <typename T>
Tensor<T> Tensor<T>::from_values(Shape shape, std::vector<T> values, bool requires_grad) {
    if (shape_size(shape) != values.size()) {
        throw DimensionError("tensor shape " + shape_string(shape) + " does not hold " +
                             std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    std::vector<T> values(shape_size(shape), value);
    return from_values(std::move(shape), std::move(values), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> values, std::vector<Tensor> parents,
                                 std::function<void(Node&)> backward_fn) {
    Tensor out = from_values(std::move(shape), std::move(values), false);
    bool any = false;
    for (const auto& p : parents) {
        if (p.defined() && p.requires_grad()) any = true;
    }
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->backward = std::move(backward_fn);
    // Keep every parent (the closure indexes them positionally).
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
    return out;
}

template <typename T>
T Tensor<T>::item() const {
    if (node_->value.size() != 1) {
        throw DimensionError("item() on tensor of shape " + shape_string(node_->shape));
    }
    return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    return from_values(node_->shape, node_->value, false);
}

template <typename T>
void backward(const Tensor<T>& root) {
    using Node = typename Tensor<T>::Node;
    if (root.size() != 1) {
        throw DimensionError("backward() needs a scalar root, got " + shape_string(root.shape()));
    }
    if (!root.requires_grad()) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->ensure_grad()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

template <typename T>
double inner(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("inner(): shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()) + " differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(b[i]);
    return acc;
}

template class Tensor<float>;
template class Tensor<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template double inner(const Tensor<float>&, const Tensor<float>&);
template double inner(const Tensor<double>&, const Tensor<double>&);

}  // namespace mtsr
