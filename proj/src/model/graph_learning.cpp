// SPDX-License-Identifier: Apache-2.0
#include "glowcast/model/graph_learning.hpp"

#include <cmath>
#include <random>

#include "glowcast/error.hpp"
#include "glowcast/numerics/ops.hpp"

namespace glowcast {

LearnedGraph init_embeddings(std::size_t nodes, std::size_t width, std::uint64_t seed) {
  if (nodes == 0 || width == 0) {
    throw ConfigError("graph embeddings need at least one node and one column");
  }
  const double bound = std::sqrt(1.0 / static_cast<double>(width));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto draw = [&] {
    std::vector<double> v(nodes * width);
    for (double& x : v) x = dist(rng);
    return v;
  };
  LearnedGraph graph;
  graph.source = Tensor::parameter({nodes, width}, draw(), "graph.source");
  graph.target = Tensor::parameter({nodes, width}, draw(), "graph.target");
  return graph;
}

Tensor derive_adjacency(const LearnedGraph& graph) {
  if (graph.source.shape() != graph.target.shape()) {
    throw DimensionError("graph embeddings differ in shape: " +
                         shape_string(graph.source.shape()) + " vs " +
                         shape_string(graph.target.shape()));
  }
  const Tensor logits = ops::matmul(graph.source, ops::transpose(graph.target));
  return ops::row_softmax(ops::relu(logits));
}

}  // namespace glowcast
