// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Each op records its adjoint on the thread's tape
// when gradient mode is on and at least one input requires a gradient.
//
// Shapes are explicit: binary elementwise ops accept identical shapes or a
// one-element operand, nothing else broadcasts. add_bias is the only op that
// spreads a vector across rows, and it says so in its name.
#pragma once

#include <span>

#include "glowcast/numerics/tensor.hpp"

namespace glowcast::ops {

enum class Unary { kRelu, kSigmoid, kTanh, kAbs };
enum class Binary { kAdd, kSub, kMul };

/// [m x k] * [k x p] -> [m x p]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Softmax along the last axis with max-subtraction. Rejects NaN/Inf input.
Tensor row_softmax(const Tensor& a);

Tensor elementwise(Unary kind, const Tensor& a);
Tensor elementwise(Binary kind, const Tensor& a, const Tensor& b);

inline Tensor relu(const Tensor& a) { return elementwise(Unary::kRelu, a); }
inline Tensor sigmoid(const Tensor& a) { return elementwise(Unary::kSigmoid, a); }
inline Tensor tanh(const Tensor& a) { return elementwise(Unary::kTanh, a); }
inline Tensor abs(const Tensor& a) { return elementwise(Unary::kAbs, a); }
inline Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(Binary::kAdd, a, b);
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise(Binary::kSub, a, b);
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise(Binary::kMul, a, b);
}

/// a * factor
Tensor scale(const Tensor& a, double factor);
/// a + offset
Tensor add_scalar(const Tensor& a, double offset);
/// 1 - a
Tensor one_minus(const Tensor& a);

/// [... x p] ++ [... x q] -> [... x (p+q)]; leading extents must agree.
Tensor concat_last_dim(const Tensor& a, const Tensor& b);

/// x [... x p] + bias [p], the bias repeated for every leading index.
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// Block-diagonal graph propagation. `h` stacks B node blocks of `adj`'s
/// order n, i.e. shape [(B*n) x d]; each block is replaced by adj * block.
Tensor graph_propagate(const Tensor& adj, const Tensor& h);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Same values under a new shape with equal element count.
Tensor reshape(const Tensor& a, Shape shape);
/// [A x B x C] -> [B x A x C]
Tensor swap_leading_axes(const Tensor& a);
/// N tensors of identical shape S -> [N x S...]
Tensor stack(std::span<const Tensor> parts);

/// mean |pred - target|
Tensor mae_loss(const Tensor& pred, const Tensor& target);

}  // namespace glowcast::ops
