#include "gtdetect/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace gtdetect::numcore {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ", ";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    const std::size_t n = shape_size(shape);
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values.assign(n, 0.0);
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad.assign(n, 0.0);
    return wrap(std::move(node));
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                    bool requires_grad) {
    if (shape_size(shape) != values.size()) {
        throw std::logic_error("Tensor::from: " + std::to_string(values.size()) +
                               " values do not fill shape " + shape_str(shape));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad.assign(node->values.size(), 0.0);
    return wrap(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

double Tensor::item() const {
    const TensorNode& n = checked();
    if (n.values.size() != 1) {
        throw std::logic_error("Tensor::item: tensor of shape " + shape_str(n.shape) +
                               " is not a scalar");
    }
    return n.values[0];
}

std::vector<double>& Tensor::mutable_values() {
    TensorNode& n = checked();
    if (!n.is_leaf()) {
        throw std::logic_error("Tensor::mutable_values: interior node values are derived");
    }
    return n.values;
}

const std::vector<double>& Tensor::grad() const {
    const TensorNode& n = checked();
    if (!n.requires_grad) {
        throw std::logic_error("Tensor::grad: tensor does not require gradients");
    }
    return n.grad;
}

void Tensor::zero_grad() {
    TensorNode& n = checked();
    std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

void Tensor::backward() {
    TensorNode& root = checked();
    if (root.values.size() != 1) {
        throw std::logic_error("Tensor::backward: root of shape " + shape_str(root.shape) +
                               " is not a scalar");
    }
    if (!root.requires_grad) {
        throw std::logic_error("Tensor::backward: root does not require gradients");
    }

    // Iterative post-order DFS over grad-requiring nodes.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(&root, 0);
    visited.insert(&root);
    while (!stack.empty()) {
        auto [node, next] = stack.back();
        if (next < node->parents.size()) {
            ++stack.back().second;
            TensorNode* parent = node->parents[next].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (TensorNode* node : order) {
        if (!node->is_leaf()) std::fill(node->grad.begin(), node->grad.end(), 0.0);
    }
    root.grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

bool Tensor::all_finite() const {
    for (double v : checked().values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace gtdetect::numcore
