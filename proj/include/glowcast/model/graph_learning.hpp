// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "glowcast/numerics/tensor.hpp"

namespace glowcast {

/// Two trainable node-embedding tables. The station adjacency is never stored;
/// it is re-derived from the embeddings on every forward pass.
struct LearnedGraph {
  Tensor source;  // [n x e]
  Tensor target;  // [n x e]

  std::size_t nodes() const { return source.dim(0); }
  std::size_t width() const { return source.dim(1); }
};

/// Uniform entries in [-sqrt(1/e), sqrt(1/e)], both tables from one seed.
LearnedGraph init_embeddings(std::size_t nodes, std::size_t width, std::uint64_t seed);

/// softmax(relu(source * target^T)), row-stochastic [n x n].
Tensor derive_adjacency(const LearnedGraph& graph);

}  // namespace glowcast
