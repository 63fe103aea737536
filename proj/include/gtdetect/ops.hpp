#pragma once

#include <cstdint>
#include <vector>

#include "gtdetect/rng.hpp"
#include "gtdetect/tensor.hpp"

// Layer primitives shared by the four detector families. Matrices are
// row-major [rows, cols]; sequences are [L, channels]; masks mark valid
// (non-PAD) positions with 1.
namespace gtdetect::numcore {

using Mask = std::vector<std::uint8_t>;

// out[i,j] = sum_r x[i,r] * w[r,j] + b[j]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// a [m,k], b [n,k] -> a * b^T, [m,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
Tensor concat_vec(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);

// table [V,d], ids in [0,V) -> [L,d]; backward scatter-adds into the table.
Tensor embed(const std::vector<std::int32_t>& ids, const Tensor& table);

// x [L,d], kernels [w,d,f], bias [f] -> [L,f], zero same-padding. For even w
// the window is floor-centred: taps cover x[t - w/2 .. t + w - 1 - w/2].
Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias);
// x [L,d], filter [w,d] -> [L,d]; channel c convolved with filter column c.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& filter);
// depthwise then position-wise d->k projection plus bias.
Tensor depthwise_separable_conv1d(const Tensor& x, const Tensor& depthwise,
                                  const Tensor& pointwise, const Tensor& bias);

// Per-row standardization with variance floor, then gain/shift per channel.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift,
                  double eps_norm = 1e-5);

// Zero out rows whose mask entry is 0.
Tensor mask_rows(const Tensor& x, const Mask& mask);

// [L,k] -> [k] aggregates over valid positions.
Tensor masked_mean_pool(const Tensor& x, const Mask& mask);
Tensor masked_max_pool(const Tensor& x, const Mask& mask);
Tensor global_max_pool(const Tensor& x);
Tensor global_avg_pool(const Tensor& x, const Mask& mask);

// Row-wise softmax over scores [Lq,Lk]; PAD keys get -1e9 added first.
Tensor softmax_masked_rows(const Tensor& scores, const Mask& key_mask);

// x [L,d]; per-head scaled dot-product self-attention over valid keys,
// heads concatenated and projected back to d.
Tensor multi_head_attention(const Tensor& x, const Mask& mask, std::size_t heads,
                            const Tensor& wq, const Tensor& bq, const Tensor& wk,
                            const Tensor& bk, const Tensor& wv, const Tensor& bv,
                            const Tensor& wo, const Tensor& bo);

// Fixed sinusoidal table [len,dim]; dim must be even. Row 0 is [0,1,0,1,...].
Tensor positional_encoding(std::size_t len, std::size_t dim);

// Training: zero with probability p, scale survivors by 1/(1-p). Identity
// (consuming no randomness) when p == 0 or training is false.
Tensor dropout(const Tensor& x, double p, Rng* rng, bool training);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Mean over the batch of smoothed binary cross-entropy terms. scores [B]
// are clamped into [1e-7, 1-1e-7]; labels are 0 or 1.
Tensor bce_label_smoothing(const Tensor& scores, const std::vector<double>& labels,
                           double label_smoothing);

}  // namespace gtdetect::numcore
