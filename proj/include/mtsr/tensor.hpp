#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mtsr {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array that can take part in a reverse-mode computation graph.
///
/// A Tensor is a cheap handle onto a shared node. Operation results are never
/// mutated after construction; only leaves (parameters, inputs) expose mutable
/// storage, which the optimizer and data loaders use.
template <typename T>
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<T> value;
        std::vector<T> grad;
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        // Reads self.grad and accumulates into the parents' grads.
        std::function<void(Node& self)> backward;

        std::vector<T>& ensure_grad() {
            if (grad.empty()) grad.assign(value.size(), T(0));
            return grad;
        }
    };

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<T> values, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    /// Builds an operation result. Parents that do not require gradients are
    /// dropped, and when none remain the backward function is discarded too.
    static Tensor make_result(Shape shape, std::vector<T> values, std::vector<Tensor> parents,
                              std::function<void(Node&)> backward);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t size() const { return node_->value.size(); }

    std::span<const T> values() const { return node_->value; }
    std::span<T> mutable_values() { return node_->value; }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->ensure_grad(); }
    bool has_grad() const { return !node_->grad.empty(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }
    void zero_grad() { node_->grad.clear(); }

    T item() const;
    T operator[](std::size_t i) const { return node_->value[i]; }

    /// Copy of the values with no graph attached.
    Tensor detach() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

/// Reverse-mode sweep from a scalar root. Leaf gradients accumulate, so callers
/// zero them between optimization steps.
template <typename T>
void backward(const Tensor<T>& root);

/// Sum of element-wise products; test and diagnostics helper.
template <typename T>
double inner(const Tensor<T>& a, const Tensor<T>& b);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace mtsr
