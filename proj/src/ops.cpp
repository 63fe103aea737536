#include "gtdetect/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "gtdetect/errors.hpp"

namespace gtdetect::numcore {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Builds an interior node. The graph (parents + closure) is recorded only
// when some parent requires gradients; inference stays graph-free.
Tensor make_op(std::vector<std::size_t> shape, std::vector<double> values,
               std::vector<TensorNodePtr> parents,
               std::function<void(const TensorNode&)> backward_fn) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    bool requires_grad = false;
    for (const TensorNodePtr& p : parents) requires_grad = requires_grad || p->requires_grad;
    node->requires_grad = requires_grad;
    if (requires_grad) {
        node->grad.assign(node->values.size(), 0.0);
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor::wrap(node);
}

void check_rank(const Tensor& t, std::size_t rank, const char* op, const char* arg) {
    if (t.rank() != rank) {
        throw std::invalid_argument(std::string(op) + ": " + arg + " has shape " +
                                    shape_str(t.shape()) + ", expected rank " +
                                    std::to_string(rank));
    }
}

}  // namespace

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_rank(x, 2, "affine", "x");
    check_rank(w, 2, "affine", "W");
    check_rank(b, 1, "affine", "b");
    const std::size_t n = x.shape()[0], p = x.shape()[1];
    const std::size_t q = w.shape()[1];
    require(w.shape()[0] == p && b.shape()[0] == q,
            "affine: x " + shape_str(x.shape()) + " incompatible with W " + shape_str(w.shape()) +
                " and b " + shape_str(b.shape()));

    const auto& xv = x.values();
    const auto& wv = w.values();
    const auto& bv = b.values();
    std::vector<double> out(n * q);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < q; ++j) out[i * q + j] = bv[j];
        for (std::size_t r = 0; r < p; ++r) {
            const double xr = xv[i * p + r];
            if (xr == 0.0) continue;
            for (std::size_t j = 0; j < q; ++j) out[i * q + j] += xr * wv[r * q + j];
        }
    }

    TensorNode* xn = x.node();
    TensorNode* wn = w.node();
    TensorNode* bn = b.node();
    return make_op({n, q}, std::move(out), {x.node_ptr(), w.node_ptr(), b.node_ptr()},
                   [xn, wn, bn, n, p, q](const TensorNode& self) {
                       const auto& g = self.grad;
                       for (std::size_t i = 0; i < n; ++i) {
                           for (std::size_t j = 0; j < q; ++j) {
                               const double gij = g[i * q + j];
                               if (gij == 0.0) continue;
                               if (bn->requires_grad) bn->grad[j] += gij;
                               for (std::size_t r = 0; r < p; ++r) {
                                   if (xn->requires_grad) {
                                       xn->grad[i * p + r] += gij * wn->values[r * q + j];
                                   }
                                   if (wn->requires_grad) {
                                       wn->grad[r * q + j] += gij * xn->values[i * p + r];
                                   }
                               }
                           }
                       }
                   });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank(a, 2, "matmul", "a");
    check_rank(b, 2, "matmul", "b");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    require(b.shape()[0] == k, "matmul: a " + shape_str(a.shape()) + " incompatible with b " +
                                   shape_str(b.shape()));
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t r = 0; r < k; ++r) {
            const double air = av[i * k + r];
            if (air == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += air * bv[r * n + j];
        }
    }
    TensorNode* an = a.node();
    TensorNode* bn = b.node();
    return make_op({m, n}, std::move(out), {a.node_ptr(), b.node_ptr()},
                   [an, bn, m, k, n](const TensorNode& self) {
                       const auto& g = self.grad;
                       for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < n; ++j) {
                               const double gij = g[i * n + j];
                               if (gij == 0.0) continue;
                               for (std::size_t r = 0; r < k; ++r) {
                                   if (an->requires_grad) {
                                       an->grad[i * k + r] += gij * bn->values[r * n + j];
                                   }
                                   if (bn->requires_grad) {
                                       bn->grad[r * n + j] += gij * an->values[i * k + r];
                                   }
                               }
                           }
                       }
                   });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_rank(a, 2, "matmul_nt", "a");
    check_rank(b, 2, "matmul_nt", "b");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
    require(b.shape()[1] == k, "matmul_nt: a " + shape_str(a.shape()) + " incompatible with b " +
                                   shape_str(b.shape()));
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < k; ++r) acc += av[i * k + r] * bv[j * k + r];
            out[i * n + j] = acc;
        }
    }
    TensorNode* an = a.node();
    TensorNode* bn = b.node();
    return make_op({m, n}, std::move(out), {a.node_ptr(), b.node_ptr()},
                   [an, bn, m, k, n](const TensorNode& self) {
                       const auto& g = self.grad;
                       for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < n; ++j) {
                               const double gij = g[i * n + j];
                               if (gij == 0.0) continue;
                               for (std::size_t r = 0; r < k; ++r) {
                                   if (an->requires_grad) {
                                       an->grad[i * k + r] += gij * bn->values[j * k + r];
                                   }
                                   if (bn->requires_grad) {
                                       bn->grad[j * k + r] += gij * an->values[i * k + r];
                                   }
                               }
                           }
                       }
                   });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "add: shape " + shape_str(a.shape()) + " does not match " +
                                        shape_str(b.shape()));
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    TensorNode* an = a.node();
    TensorNode* bn = b.node();
    return make_op(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                   [an, bn](const TensorNode& self) {
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           if (an->requires_grad) an->grad[i] += self.grad[i];
                           if (bn->requires_grad) bn->grad[i] += self.grad[i];
                       }
                   });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
    TensorNode* an = a.node();
    return make_op(a.shape(), std::move(out), {a.node_ptr()},
                   [an, factor](const TensorNode& self) {
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           an->grad[i] += self.grad[i] * factor;
                       }
                   });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.values()[i]);
    TensorNode* xn = x.node();
    return make_op(x.shape(), std::move(out), {x.node_ptr()}, [xn](const TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (xn->values[i] > 0.0) xn->grad[i] += self.grad[i];
        }
    });
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x.values()[i];
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    TensorNode* xn = x.node();
    return make_op(x.shape(), std::move(out), {x.node_ptr()}, [xn](const TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.values[i];
            xn->grad[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    require(shape_size(shape) == x.size(), "reshape: shape " + shape_str(shape) +
                                               " does not hold " + std::to_string(x.size()) +
                                               " values");
    TensorNode* xn = x.node();
    return make_op(std::move(shape), x.values(), {x.node_ptr()}, [xn](const TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
    });
}

Tensor concat_vec(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_vec: no inputs");
    std::vector<double> out;
    std::vector<TensorNodePtr> parents;
    std::vector<TensorNode*> nodes;
    std::vector<std::size_t> offsets;
    for (const Tensor& t : parts) {
        check_rank(t, 1, "concat_vec", "part");
        offsets.push_back(out.size());
        out.insert(out.end(), t.values().begin(), t.values().end());
        parents.push_back(t.node_ptr());
        nodes.push_back(t.node());
    }
    const std::size_t total = out.size();
    return make_op({total}, std::move(out), std::move(parents),
                   [nodes, offsets](const TensorNode& self) {
                       for (std::size_t k = 0; k < nodes.size(); ++k) {
                           if (!nodes[k]->requires_grad) continue;
                           auto& pg = nodes[k]->grad;
                           const std::size_t off = offsets[k];
                           for (std::size_t i = 0; i < pg.size(); ++i) {
                               pg[i] += self.grad[off + i];
                           }
                       }
                   });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t rows = parts.front().rank() == 2 ? parts.front().shape()[0] : 0;
    std::size_t total_cols = 0;
    std::vector<std::size_t> cols;
    for (const Tensor& t : parts) {
        check_rank(t, 2, "concat_cols", "part");
        require(t.shape()[0] == rows, "concat_cols: row mismatch between " +
                                          shape_str(parts.front().shape()) + " and " +
                                          shape_str(t.shape()));
        cols.push_back(t.shape()[1]);
        total_cols += t.shape()[1];
    }
    std::vector<double> out(rows * total_cols);
    std::vector<TensorNodePtr> parents;
    std::vector<TensorNode*> nodes;
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& v = parts[k].values();
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols[k]; ++j) {
                out[i * total_cols + off + j] = v[i * cols[k] + j];
            }
        }
        offsets.push_back(off);
        off += cols[k];
        parents.push_back(parts[k].node_ptr());
        nodes.push_back(parts[k].node());
    }
    return make_op({rows, total_cols}, std::move(out), std::move(parents),
                   [nodes, offsets, cols, rows, total_cols](const TensorNode& self) {
                       for (std::size_t k = 0; k < nodes.size(); ++k) {
                           if (!nodes[k]->requires_grad) continue;
                           auto& pg = nodes[k]->grad;
                           for (std::size_t i = 0; i < rows; ++i) {
                               for (std::size_t j = 0; j < cols[k]; ++j) {
                                   pg[i * cols[k] + j] +=
                                       self.grad[i * total_cols + offsets[k] + j];
                               }
                           }
                       }
                   });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    check_rank(x, 2, "slice_cols", "x");
    const std::size_t rows = x.shape()[0], c = x.shape()[1];
    require(count >= 1 && begin + count <= c,
            "slice_cols: columns [" + std::to_string(begin) + ", " +
                std::to_string(begin + count) + ") out of range for " + shape_str(x.shape()));
    std::vector<double> out(rows * count);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < count; ++j) out[i * count + j] = x.values()[i * c + begin + j];
    }
    TensorNode* xn = x.node();
    return make_op({rows, count}, std::move(out), {x.node_ptr()},
                   [xn, rows, c, begin, count](const TensorNode& self) {
                       for (std::size_t i = 0; i < rows; ++i) {
                           for (std::size_t j = 0; j < count; ++j) {
                               xn->grad[i * c + begin + j] += self.grad[i * count + j];
                           }
                       }
                   });
}

Tensor embed(const std::vector<std::int32_t>& ids, const Tensor& table) {
    check_rank(table, 2, "embed", "table");
    const std::size_t v = table.shape()[0], d = table.shape()[1];
    const std::size_t l = ids.size();
    require(l >= 1, "embed: empty id list");
    for (std::int32_t id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= v) {
            throw DataError("embed: token id " + std::to_string(id) +
                            " out of range for vocabulary of size " + std::to_string(v));
        }
    }
    std::vector<double> out(l * d);
    for (std::size_t t = 0; t < l; ++t) {
        const std::size_t row = static_cast<std::size_t>(ids[t]);
        std::copy_n(table.values().begin() + row * d, d, out.begin() + t * d);
    }
    TensorNode* tn = table.node();
    std::vector<std::int32_t> ids_copy = ids;
    return make_op({l, d}, std::move(out), {table.node_ptr()},
                   [tn, ids_copy, d](const TensorNode& self) {
                       for (std::size_t t = 0; t < ids_copy.size(); ++t) {
                           const std::size_t row = static_cast<std::size_t>(ids_copy[t]);
                           for (std::size_t j = 0; j < d; ++j) {
                               tn->grad[row * d + j] += self.grad[t * d + j];
                           }
                       }
                   });
}

Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias) {
    check_rank(x, 2, "conv1d", "x");
    check_rank(kernels, 3, "conv1d", "kernels");
    check_rank(bias, 1, "conv1d", "bias");
    const std::size_t l = x.shape()[0], d = x.shape()[1];
    const std::size_t w = kernels.shape()[0], f = kernels.shape()[2];
    require(kernels.shape()[1] == d, "conv1d: x " + shape_str(x.shape()) +
                                         " incompatible with kernels " +
                                         shape_str(kernels.shape()));
    require(bias.shape()[0] == f, "conv1d: bias " + shape_str(bias.shape()) +
                                      " incompatible with kernels " + shape_str(kernels.shape()));
    require(w >= 1, "conv1d: kernel width must be positive");
    if (w > l) {
        throw std::invalid_argument("conv1d: kernel width " + std::to_string(w) +
                                    " exceeds sequence length " + std::to_string(l));
    }
    const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(w / 2);

    const auto& xv = x.values();
    const auto& kv = kernels.values();
    const auto& bv = bias.values();
    std::vector<double> out(l * f);
    for (std::size_t t = 0; t < l; ++t) {
        for (std::size_t j = 0; j < f; ++j) out[t * f + j] = bv[j];
        for (std::size_t u = 0; u < w; ++u) {
            const std::ptrdiff_t s =
                static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(u) - center;
            if (s < 0 || s >= static_cast<std::ptrdiff_t>(l)) continue;
            for (std::size_t c = 0; c < d; ++c) {
                const double xs = xv[static_cast<std::size_t>(s) * d + c];
                if (xs == 0.0) continue;
                const double* krow = &kv[(u * d + c) * f];
                for (std::size_t j = 0; j < f; ++j) out[t * f + j] += xs * krow[j];
            }
        }
    }

    TensorNode* xn = x.node();
    TensorNode* kn = kernels.node();
    TensorNode* bn = bias.node();
    return make_op(
        {l, f}, std::move(out), {x.node_ptr(), kernels.node_ptr(), bias.node_ptr()},
        [xn, kn, bn, l, d, w, f, center](const TensorNode& self) {
            const auto& g = self.grad;
            for (std::size_t t = 0; t < l; ++t) {
                if (bn->requires_grad) {
                    for (std::size_t j = 0; j < f; ++j) bn->grad[j] += g[t * f + j];
                }
                for (std::size_t u = 0; u < w; ++u) {
                    const std::ptrdiff_t s =
                        static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(u) - center;
                    if (s < 0 || s >= static_cast<std::ptrdiff_t>(l)) continue;
                    const std::size_t si = static_cast<std::size_t>(s);
                    for (std::size_t c = 0; c < d; ++c) {
                        for (std::size_t j = 0; j < f; ++j) {
                            const double gij = g[t * f + j];
                            if (gij == 0.0) continue;
                            if (xn->requires_grad) {
                                xn->grad[si * d + c] += gij * kn->values[(u * d + c) * f + j];
                            }
                            if (kn->requires_grad) {
                                kn->grad[(u * d + c) * f + j] += gij * xn->values[si * d + c];
                            }
                        }
                    }
                }
            }
        });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& filter) {
    check_rank(x, 2, "depthwise_conv1d", "x");
    check_rank(filter, 2, "depthwise_conv1d", "filter");
    const std::size_t l = x.shape()[0], d = x.shape()[1];
    const std::size_t w = filter.shape()[0];
    require(filter.shape()[1] == d, "depthwise_conv1d: x " + shape_str(x.shape()) +
                                        " incompatible with filter " + shape_str(filter.shape()));
    require(w >= 1, "depthwise_conv1d: filter width must be positive");
    if (w > l) {
        throw std::invalid_argument("depthwise_conv1d: filter width " + std::to_string(w) +
                                    " exceeds sequence length " + std::to_string(l));
    }
    const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(w / 2);

    const auto& xv = x.values();
    const auto& fv = filter.values();
    std::vector<double> out(l * d, 0.0);
    for (std::size_t t = 0; t < l; ++t) {
        for (std::size_t u = 0; u < w; ++u) {
            const std::ptrdiff_t s =
                static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(u) - center;
            if (s < 0 || s >= static_cast<std::ptrdiff_t>(l)) continue;
            for (std::size_t c = 0; c < d; ++c) {
                out[t * d + c] += xv[static_cast<std::size_t>(s) * d + c] * fv[u * d + c];
            }
        }
    }

    TensorNode* xn = x.node();
    TensorNode* fn = filter.node();
    return make_op({l, d}, std::move(out), {x.node_ptr(), filter.node_ptr()},
                   [xn, fn, l, d, w, center](const TensorNode& self) {
                       const auto& g = self.grad;
                       for (std::size_t t = 0; t < l; ++t) {
                           for (std::size_t u = 0; u < w; ++u) {
                               const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) +
                                                        static_cast<std::ptrdiff_t>(u) - center;
                               if (s < 0 || s >= static_cast<std::ptrdiff_t>(l)) continue;
                               const std::size_t si = static_cast<std::size_t>(s);
                               for (std::size_t c = 0; c < d; ++c) {
                                   const double gtc = g[t * d + c];
                                   if (gtc == 0.0) continue;
                                   if (xn->requires_grad) {
                                       xn->grad[si * d + c] += gtc * fn->values[u * d + c];
                                   }
                                   if (fn->requires_grad) {
                                       fn->grad[u * d + c] += gtc * xn->values[si * d + c];
                                   }
                               }
                           }
                       }
                   });
}

Tensor depthwise_separable_conv1d(const Tensor& x, const Tensor& depthwise,
                                  const Tensor& pointwise, const Tensor& bias) {
    return affine(depthwise_conv1d(x, depthwise), pointwise, bias);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps_norm) {
    check_rank(x, 2, "layer_norm", "x");
    check_rank(gain, 1, "layer_norm", "gain");
    check_rank(shift, 1, "layer_norm", "shift");
    const std::size_t l = x.shape()[0], k = x.shape()[1];
    require(gain.shape()[0] == k && shift.shape()[0] == k,
            "layer_norm: x " + shape_str(x.shape()) + " incompatible with gain " +
                shape_str(gain.shape()) + " and shift " + shape_str(shift.shape()));
    require(eps_norm > 0.0, "layer_norm: eps must be positive");

    const auto& xv = x.values();
    const auto& gv = gain.values();
    const auto& sv = shift.values();
    std::vector<double> out(l * k);
    for (std::size_t i = 0; i < l; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < k; ++j) mean += xv[i * k + j];
        mean /= static_cast<double>(k);
        double var = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double c = xv[i * k + j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(k);
        const double inv = 1.0 / std::sqrt(std::max(var, eps_norm));
        for (std::size_t j = 0; j < k; ++j) {
            out[i * k + j] = gv[j] * ((xv[i * k + j] - mean) * inv) + sv[j];
        }
    }

    TensorNode* xn = x.node();
    TensorNode* gn = gain.node();
    TensorNode* sn = shift.node();
    return make_op(
        {l, k}, std::move(out), {x.node_ptr(), gain.node_ptr(), shift.node_ptr()},
        [xn, gn, sn, l, k, eps_norm](const TensorNode& self) {
            const auto& g = self.grad;
            const double dk = static_cast<double>(k);
            for (std::size_t i = 0; i < l; ++i) {
                double mean = 0.0;
                for (std::size_t j = 0; j < k; ++j) mean += xn->values[i * k + j];
                mean /= dk;
                double var = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    const double c = xn->values[i * k + j] - mean;
                    var += c * c;
                }
                var /= dk;
                const bool floored = var <= eps_norm;
                const double inv = 1.0 / std::sqrt(std::max(var, eps_norm));

                // G = upstream grad w.r.t. the standardized row
                double sum_g = 0.0;
                double sum_gc = 0.0;  // sum of G[j] * (x[j] - mean)
                for (std::size_t j = 0; j < k; ++j) {
                    const double gj = g[i * k + j] * gn->values[j];
                    sum_g += gj;
                    sum_gc += gj * (xn->values[i * k + j] - mean);
                }
                for (std::size_t j = 0; j < k; ++j) {
                    const double c = xn->values[i * k + j] - mean;
                    const double xhat = c * inv;
                    if (gn->requires_grad) gn->grad[j] += g[i * k + j] * xhat;
                    if (sn->requires_grad) sn->grad[j] += g[i * k + j];
                    if (xn->requires_grad) {
                        const double gj = g[i * k + j] * gn->values[j];
                        double dx = inv * (gj - sum_g / dk);
                        if (!floored) dx -= inv * inv * inv / dk * c * sum_gc;
                        xn->grad[i * k + j] += dx;
                    }
                }
            }
        });
}

Tensor mask_rows(const Tensor& x, const Mask& mask) {
    check_rank(x, 2, "mask_rows", "x");
    const std::size_t l = x.shape()[0], d = x.shape()[1];
    require(mask.size() == l, "mask_rows: mask length " + std::to_string(mask.size()) +
                                  " does not match x " + shape_str(x.shape()));
    std::vector<double> out(l * d, 0.0);
    for (std::size_t t = 0; t < l; ++t) {
        if (!mask[t]) continue;
        for (std::size_t j = 0; j < d; ++j) out[t * d + j] = x.values()[t * d + j];
    }
    TensorNode* xn = x.node();
    Mask mask_copy = mask;
    return make_op({l, d}, std::move(out), {x.node_ptr()},
                   [xn, mask_copy, d](const TensorNode& self) {
                       for (std::size_t t = 0; t < mask_copy.size(); ++t) {
                           if (!mask_copy[t]) continue;
                           for (std::size_t j = 0; j < d; ++j) {
                               xn->grad[t * d + j] += self.grad[t * d + j];
                           }
                       }
                   });
}

Tensor masked_mean_pool(const Tensor& x, const Mask& mask) {
    check_rank(x, 2, "masked_mean_pool", "x");
    const std::size_t l = x.shape()[0], k = x.shape()[1];
    require(mask.size() == l, "masked_mean_pool: mask length " + std::to_string(mask.size()) +
                                  " does not match x " + shape_str(x.shape()));
    std::size_t valid = 0;
    for (std::uint8_t m : mask) valid += m;
    require(valid >= 1, "masked_mean_pool: empty sequence");
    const double inv = 1.0 / static_cast<double>(valid);
    std::vector<double> out(k, 0.0);
    for (std::size_t t = 0; t < l; ++t) {
        if (!mask[t]) continue;
        for (std::size_t j = 0; j < k; ++j) out[j] += x.values()[t * k + j] * inv;
    }
    TensorNode* xn = x.node();
    Mask mask_copy = mask;
    return make_op({k}, std::move(out), {x.node_ptr()},
                   [xn, mask_copy, k, inv](const TensorNode& self) {
                       for (std::size_t t = 0; t < mask_copy.size(); ++t) {
                           if (!mask_copy[t]) continue;
                           for (std::size_t j = 0; j < k; ++j) {
                               xn->grad[t * k + j] += self.grad[j] * inv;
                           }
                       }
                   });
}

namespace {

// Shared by the masked and global max pools; winners take the first
// occurrence so the backward routing is deterministic.
Tensor max_pool_impl(const Tensor& x, const Mask* mask, const char* op) {
    const std::size_t l = x.shape()[0], k = x.shape()[1];
    std::vector<std::size_t> argmax(k, 0);
    std::vector<double> out(k, -std::numeric_limits<double>::infinity());
    bool any = false;
    for (std::size_t t = 0; t < l; ++t) {
        if (mask && !(*mask)[t]) continue;
        any = true;
        for (std::size_t j = 0; j < k; ++j) {
            const double v = x.values()[t * k + j];
            if (v > out[j]) {
                out[j] = v;
                argmax[j] = t;
            }
        }
    }
    require(any, std::string(op) + ": empty sequence");
    TensorNode* xn = x.node();
    return make_op({k}, std::move(out), {x.node_ptr()},
                   [xn, argmax, k](const TensorNode& self) {
                       for (std::size_t j = 0; j < k; ++j) {
                           xn->grad[argmax[j] * k + j] += self.grad[j];
                       }
                   });
}

}  // namespace

Tensor masked_max_pool(const Tensor& x, const Mask& mask) {
    check_rank(x, 2, "masked_max_pool", "x");
    require(mask.size() == x.shape()[0],
            "masked_max_pool: mask length " + std::to_string(mask.size()) +
                " does not match x " + shape_str(x.shape()));
    return max_pool_impl(x, &mask, "masked_max_pool");
}

Tensor global_max_pool(const Tensor& x) {
    check_rank(x, 2, "global_max_pool", "x");
    return max_pool_impl(x, nullptr, "global_max_pool");
}

Tensor global_avg_pool(const Tensor& x, const Mask& mask) {
    return masked_mean_pool(x, mask);
}

Tensor softmax_masked_rows(const Tensor& scores, const Mask& key_mask) {
    check_rank(scores, 2, "softmax_masked_rows", "scores");
    const std::size_t lq = scores.shape()[0], lk = scores.shape()[1];
    require(key_mask.size() == lk,
            "softmax_masked_rows: mask length " + std::to_string(key_mask.size()) +
                " does not match scores " + shape_str(scores.shape()));
    bool any = false;
    for (std::uint8_t m : key_mask) any = any || m;
    require(any, "softmax_masked_rows: empty sequence");

    std::vector<double> out(lq * lk);
    for (std::size_t i = 0; i < lq; ++i) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < lk; ++j) {
            const double z = scores.values()[i * lk + j] + (key_mask[j] ? 0.0 : -1e9);
            out[i * lk + j] = z;
            row_max = std::max(row_max, z);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < lk; ++j) {
            out[i * lk + j] = std::exp(out[i * lk + j] - row_max);
            denom += out[i * lk + j];
        }
        for (std::size_t j = 0; j < lk; ++j) out[i * lk + j] /= denom;
    }

    TensorNode* sn = scores.node();
    return make_op({lq, lk}, std::move(out), {scores.node_ptr()},
                   [sn, lq, lk](const TensorNode& self) {
                       for (std::size_t i = 0; i < lq; ++i) {
                           double dot = 0.0;
                           for (std::size_t j = 0; j < lk; ++j) {
                               dot += self.grad[i * lk + j] * self.values[i * lk + j];
                           }
                           for (std::size_t j = 0; j < lk; ++j) {
                               const double y = self.values[i * lk + j];
                               sn->grad[i * lk + j] += y * (self.grad[i * lk + j] - dot);
                           }
                       }
                   });
}

Tensor multi_head_attention(const Tensor& x, const Mask& mask, std::size_t heads,
                            const Tensor& wq, const Tensor& bq, const Tensor& wk,
                            const Tensor& bk, const Tensor& wv, const Tensor& bv,
                            const Tensor& wo, const Tensor& bo) {
    check_rank(x, 2, "multi_head_attention", "x");
    const std::size_t d = x.shape()[1];
    require(heads >= 1, "multi_head_attention: heads must be positive");
    if (d % heads != 0) {
        throw std::invalid_argument("multi_head_attention: embed dim " + std::to_string(d) +
                                    " not divisible by heads " + std::to_string(heads));
    }
    const std::size_t dh = d / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Tensor q = affine(x, wq, bq);
    const Tensor k = affine(x, wk, bk);
    const Tensor v = affine(x, wv, bv);
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor qh = slice_cols(q, h * dh, dh);
        const Tensor kh = slice_cols(k, h * dh, dh);
        const Tensor vh = slice_cols(v, h * dh, dh);
        const Tensor weights = softmax_masked_rows(scale(matmul_nt(qh, kh), att_scale), mask);
        head_outputs.push_back(matmul(weights, vh));
    }
    return affine(concat_cols(head_outputs), wo, bo);
}

Tensor positional_encoding(std::size_t len, std::size_t dim) {
    require(len >= 1, "positional_encoding: length must be positive");
    if (dim == 0 || dim % 2 != 0) {
        throw std::invalid_argument("positional_encoding: dim " + std::to_string(dim) +
                                    " must be even");
    }
    std::vector<double> out(len * dim);
    for (std::size_t pos = 0; pos < len; ++pos) {
        for (std::size_t i = 0; i < dim / 2; ++i) {
            const double freq =
                std::exp(-std::log(10000.0) * (2.0 * static_cast<double>(i)) /
                         static_cast<double>(dim));
            const double angle = static_cast<double>(pos) * freq;
            out[pos * dim + 2 * i] = std::sin(angle);
            out[pos * dim + 2 * i + 1] = std::cos(angle);
        }
    }
    return Tensor::from({len, dim}, std::move(out), false);
}

Tensor dropout(const Tensor& x, double p, Rng* rng, bool training) {
    if (p < 0.0 || p >= 1.0) {
        throw std::invalid_argument("dropout: p = " + std::to_string(p) +
                                    " outside [0, 1)");
    }
    if (!training || p == 0.0) return x;
    if (rng == nullptr) throw std::logic_error("dropout: training mode needs an rng");

    const double keep_scale = 1.0 / (1.0 - p);
    Mask keep(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        keep[i] = rng->uniform() >= p ? 1 : 0;
        out[i] = keep[i] ? x.values()[i] * keep_scale : 0.0;
    }
    TensorNode* xn = x.node();
    return make_op(x.shape(), std::move(out), {x.node_ptr()},
                   [xn, keep, keep_scale](const TensorNode& self) {
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           if (keep[i]) xn->grad[i] += self.grad[i] * keep_scale;
                       }
                   });
}

Tensor sum_all(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) total += v;
    TensorNode* xn = x.node();
    return make_op({}, {total}, {x.node_ptr()}, [xn](const TensorNode& self) {
        for (double& g : xn->grad) g += self.grad[0];
    });
}

Tensor mean_all(const Tensor& x) {
    require(x.size() >= 1, "mean_all: empty tensor");
    const double inv = 1.0 / static_cast<double>(x.size());
    double total = 0.0;
    for (double v : x.values()) total += v;
    TensorNode* xn = x.node();
    return make_op({}, {total * inv}, {x.node_ptr()}, [xn, inv](const TensorNode& self) {
        for (double& g : xn->grad) g += self.grad[0] * inv;
    });
}

Tensor bce_label_smoothing(const Tensor& scores, const std::vector<double>& labels,
                           double label_smoothing) {
    check_rank(scores, 1, "bce_label_smoothing", "scores");
    const std::size_t b = scores.shape()[0];
    require(b >= 1, "bce_label_smoothing: empty batch");
    require(labels.size() == b, "bce_label_smoothing: " + std::to_string(labels.size()) +
                                    " labels for scores " + shape_str(scores.shape()));
    require(label_smoothing >= 0.0 && label_smoothing <= 0.5,
            "bce_label_smoothing: smoothing outside [0, 0.5]");
    for (double y : labels) {
        require(y == 0.0 || y == 1.0, "bce_label_smoothing: labels must be 0 or 1");
    }
    constexpr double kLo = 1e-7;
    constexpr double kHi = 1.0 - 1e-7;

    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double yc = std::clamp(scores.values()[i], kLo, kHi);
        const double yp = labels[i] * (1.0 - label_smoothing) + label_smoothing / 2.0;
        total += -(yp * std::log(yc) + (1.0 - yp) * std::log(1.0 - yc));
    }
    const double inv_b = 1.0 / static_cast<double>(b);

    TensorNode* sn = scores.node();
    std::vector<double> labels_copy = labels;
    return make_op({}, {total * inv_b}, {scores.node_ptr()},
                   [sn, labels_copy, label_smoothing, inv_b](const TensorNode& self) {
                       for (std::size_t i = 0; i < labels_copy.size(); ++i) {
                           const double raw = sn->values[i];
                           if (raw <= kLo || raw >= kHi) continue;  // clamp is flat
                           const double yp = labels_copy[i] * (1.0 - label_smoothing) +
                                             label_smoothing / 2.0;
                           sn->grad[i] +=
                               self.grad[0] * inv_b * (raw - yp) / (raw * (1.0 - raw));
                       }
                   });
}

}  // namespace gtdetect::numcore
