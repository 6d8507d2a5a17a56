#pragma once

#include "d3net/imagecore.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace d3net::nn {

/// NCHW extent.
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    bool operator==(const Shape&) const = default;
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

inline std::atomic<std::uint64_t>& node_counter() {
    static std::atomic<std::uint64_t> counter{0};
    return counter;
}

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

/// Disables tape recording on this thread for its lifetime (inference).
class NoGradGuard {
public:
    NoGradGuard() : previous_(grad_mode_flag()) { grad_mode_flag() = false; }
    ~NoGradGuard() { grad_mode_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// One value on the tape. Ids increase with creation, so every node's parents
/// have smaller ids than the node itself.
template <typename Scalar>
struct Node {
    Shape shape;
    std::vector<Scalar> value;
    std::vector<Scalar> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward;
    std::uint64_t id = node_counter()++;
    bool requires_grad = false;

    Scalar* ensure_grad() {
        if (grad.size() != value.size()) {
            grad.assign(value.size(), Scalar(0));
        }
        return grad.data();
    }
};

template <typename Scalar>
class Tensor {
public:
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<Scalar>> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto node = std::make_shared<Node<Scalar>>();
        node->shape = shape;
        node->value.assign(shape.numel(), Scalar(0));
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor from(Shape shape, std::vector<Scalar> values, bool requires_grad = false) {
        if (values.size() != shape.numel()) {
            throw ContractError("Tensor::from: " + std::to_string(values.size()) + " values for shape " + shape.str());
        }
        auto node = std::make_shared<Node<Scalar>>();
        node->shape = shape;
        node->value = std::move(values);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->value.size(); }
    std::uint64_t node_id() const { return node_->id; }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<Scalar> data() { return node_->value; }
    std::span<const Scalar> data() const { return node_->value; }
    Eigen::Map<Array> array() { return {node_->value.data(), static_cast<Eigen::Index>(numel())}; }
    Eigen::Map<const Array> array() const { return {node_->value.data(), static_cast<Eigen::Index>(numel())}; }

    bool has_grad() const { return node_->grad.size() == node_->value.size() && !node_->value.empty(); }
    std::span<const Scalar> grad() const { return node_->grad; }
    Eigen::Map<const Array> grad_array() const {
        return {node_->grad.data(), static_cast<Eigen::Index>(node_->grad.size())};
    }
    void zero_grad() { node_->grad.assign(node_->value.size(), Scalar(0)); }

    Scalar item() const {
        if (numel() != 1) {
            throw ContractError("Tensor::item: tensor of shape " + shape().str() + " is not a scalar");
        }
        return node_->value.front();
    }

    Scalar& at(int n, int c, int y, int x) { return node_->value[offset(n, c, y, x)]; }
    Scalar at(int n, int c, int y, int x) const { return node_->value[offset(n, c, y, x)]; }

    const std::shared_ptr<Node<Scalar>>& node() const { return node_; }

private:
    std::size_t offset(int n, int c, int y, int x) const {
        const Shape& s = node_->shape;
        return ((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x;
    }

    std::shared_ptr<Node<Scalar>> node_;
};

namespace detail {

/// Creates an op output. When recording is enabled and any input needs
/// gradients, the node keeps its inputs alive and will run `backward`.
template <typename Scalar>
std::shared_ptr<Node<Scalar>> make_output(Shape shape, std::initializer_list<const Tensor<Scalar>*> inputs) {
    auto node = std::make_shared<Node<Scalar>>();
    node->shape = shape;
    node->value.assign(shape.numel(), Scalar(0));
    if (grad_mode_flag()) {
        for (const auto* in : inputs) {
            if (in->requires_grad()) {
                node->requires_grad = true;
            }
        }
        if (node->requires_grad) {
            for (const auto* in : inputs) {
                node->parents.push_back(in->node());
            }
        }
    }
    return node;
}

} // namespace detail

/// Reverse-mode accumulation from a scalar. Gradients of leaf tensors
/// (parameters) accumulate across calls; intermediate gradients are reset.
template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward: loss must be a scalar tensor");
    }
    if (!loss.requires_grad()) {
        return;
    }
    std::vector<Node<Scalar>*> order;
    std::vector<Node<Scalar>*> stack{loss.node().get()};
    std::unordered_set<const Node<Scalar>*> seen;
    while (!stack.empty()) {
        Node<Scalar>* node = stack.back();
        stack.pop_back();
        if (!seen.insert(node).second) {
            continue;
        }
        order.push_back(node);
        for (const auto& p : node->parents) {
            if (p->requires_grad) {
                stack.push_back(p.get());
            }
        }
    }
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->id > b->id; });
    for (auto* node : order) {
        if (node->backward) {
            node->grad.assign(node->value.size(), Scalar(0));
        }
    }
    loss.node()->ensure_grad()[0] += Scalar(1);
    for (auto* node : order) {
        if (node->backward) {
            node->backward();
        }
    }
}

} // namespace d3net::nn
