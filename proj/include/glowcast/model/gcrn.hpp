// SPDX-License-Identifier: Apache-2.0
//
// Graph-convolutional GRU cell. Each gate is a one-hop graph convolution
// over the learned adjacency instead of a dense layer:
//
//   r = sigmoid(A [x, h] W_r + b_r)
//   u = sigmoid(A [x, h] W_u + b_u)
//   c = tanh(A [x, r*h] W_c + b_c)
//   h' = u*h + (1-u)*c
//
// Signals are node-major [rows x width] where rows stacks one or more
// samples of n nodes each (see ops::graph_propagate).
#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "glowcast/numerics/tensor.hpp"

namespace glowcast {

struct GraphConvParams {
  Tensor weight;  // [d_in x d_out]
  Tensor bias;    // [d_out]

  std::size_t in_width() const { return weight.dim(0); }
  std::size_t out_width() const { return weight.dim(1); }
};

/// adj * h_in * weight + bias. Affine: the caller applies the nonlinearity.
Tensor graph_conv(const Tensor& adj, const Tensor& h_in, const GraphConvParams& params);

struct GcrnCell {
  GraphConvParams reset;
  GraphConvParams update;
  GraphConvParams candidate;

  std::size_t input_width() const { return reset.in_width() - hidden_width(); }
  std::size_t hidden_width() const { return reset.out_width(); }

  /// Xavier-uniform weights, zero reset/candidate bias, update bias 1 (so the
  /// cell starts out leaning on its previous state). Names are prefixed.
  static GcrnCell init(std::size_t input_width, std::size_t hidden_width,
                       std::mt19937_64& rng, const std::string& prefix);

  std::vector<Tensor> parameters() const;
};

Tensor gcrn_step(const GcrnCell& cell, const Tensor& adj, const Tensor& x_t,
                 const Tensor& h_prev);

}  // namespace glowcast
