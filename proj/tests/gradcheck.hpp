#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gtdetect/rng.hpp"
#include "gtdetect/tensor.hpp"

namespace testutil {

using gtdetect::Rng;
using gtdetect::numcore::Tensor;

inline Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                          double hi = 1.0, bool requires_grad = true) {
    const std::size_t n = gtdetect::numcore::shape_size(shape);
    std::vector<double> values(n);
    for (double& v : values) v = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

// Central finite differences against the analytic backward pass. `forward`
// must rebuild the graph from the leaves' current values on every call and
// return a one-element tensor.
inline double max_rel_grad_error(const std::function<Tensor()>& forward,
                                 std::vector<Tensor> leaves, double h = 1e-5) {
    for (Tensor& leaf : leaves) leaf.zero_grad();
    Tensor loss = forward();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const Tensor& leaf : leaves) analytic.push_back(leaf.grad());

    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        std::vector<double>& vals = leaves[li].mutable_values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + h;
            const double up = forward().item();
            vals[i] = orig - h;
            const double down = forward().item();
            vals[i] = orig;
            const double fd = (up - down) / (2.0 * h);
            const double a = analytic[li][i];
            const double denom = std::max({std::fabs(a), std::fabs(fd), 1e-6});
            worst = std::max(worst, std::fabs(a - fd) / denom);
        }
    }
    return worst;
}

}  // namespace testutil
