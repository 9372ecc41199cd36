#pragma once

#include <vector>

#include "tsc/autodiff/tensor.hpp"

namespace tsc::ad {

// Elementwise, operands of identical shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Elementwise min; ties pass the gradient to `a`.
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
Tensor square(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Gradient is zero where the input lies outside [lo, hi].
Tensor clamp(const Tensor& x, double lo, double hi);

/// Numerically stable -[t log s(l) + (1 - t) log(1 - s(l))], elementwise.
/// `target` is treated as a constant.
Tensor bce_with_logits(const Tensor& logits, const Tensor& target);

// Along the last axis of a rank-2 tensor [N, M].
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
/// [N, p] | [N, q] -> [N, p + q]
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// [N, M], one column per row -> [N]
Tensor gather_cols(const Tensor& x, const std::vector<int>& cols);

/// x [N, in], w [out, in], b [out] -> [N, out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// x [N, C, H, W], k [O, C, kh, kw], b [O] -> [N, O, Ho, Wo] (cross-correlation).
Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& b, int stride, int padding);

/// x [N, Ci, H, W], k [Ci, Co, kh, kw], b [Co] -> [N, Co, Ho, Wo] with
/// Ho = (H - 1) * stride - 2 * padding + kh + output_padding_h. The adjoint of
/// conv2d with the same kernel, stride and padding.
Tensor conv_transpose2d(const Tensor& x, const Tensor& k, const Tensor& b, int stride, int padding,
                        int output_padding_h, int output_padding_w);
inline Tensor conv_transpose2d(const Tensor& x, const Tensor& k, const Tensor& b, int stride, int padding,
                               int output_padding = 0) {
  return conv_transpose2d(x, k, b, stride, padding, output_padding, output_padding);
}

inline int conv_out_size(int in, int k, int stride, int padding) { return (in + 2 * padding - k) / stride + 1; }
inline int conv_transpose_out_size(int in, int k, int stride, int padding, int output_padding) {
  return (in - 1) * stride - 2 * padding + k + output_padding;
}

}  // namespace tsc::ad
