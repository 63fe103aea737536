#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace gtdetect::numcore {

struct TensorNode;
using TensorNodePtr = std::shared_ptr<TensorNode>;

// One node of the computation graph. Interior nodes own their parents via
// shared_ptr; the backward closure only captures raw parent pointers, so no
// reference cycles arise.
struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::vector<TensorNodePtr> parents;
    std::function<void(const TensorNode&)> backward_fn;

    bool is_leaf() const { return parents.empty(); }
};

// Value-semantic handle on a graph node. Copies alias the same node.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return checked().shape; }
    std::size_t rank() const { return checked().shape.size(); }
    std::size_t size() const { return checked().values.size(); }
    const std::vector<double>& values() const { return checked().values; }
    double item() const;

    // Direct mutation is only allowed on leaves; interior values are derived.
    std::vector<double>& mutable_values();

    bool requires_grad() const { return checked().requires_grad; }
    const std::vector<double>& grad() const;
    void zero_grad();

    // Reverse-mode sweep from a one-element tensor. Interior gradients are
    // cleared on every call; leaf gradients accumulate until zero_grad().
    void backward();

    bool all_finite() const;

    TensorNode* node() const { return node_.get(); }
    const TensorNodePtr& node_ptr() const { return node_; }

    static Tensor wrap(TensorNodePtr node) {
        Tensor t;
        t.node_ = std::move(node);
        return t;
    }

private:
    TensorNode& checked() const {
        if (!node_) throw std::logic_error("Tensor: use of empty handle");
        return *node_;
    }

    TensorNodePtr node_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace gtdetect::numcore
