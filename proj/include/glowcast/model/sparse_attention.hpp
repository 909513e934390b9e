// SPDX-License-Identifier: Apache-2.0
//
// ProbSparse attention. Queries are ranked by how far their score
// distribution is from uniform (max minus mean of the scaled scores); only
// the top-u queries attend, the rest return the mean of the values.
#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "glowcast/numerics/tensor.hpp"

namespace glowcast {

struct SparsityBudget {
  double factor = 5.0;

  /// min(L_Q, ceil(factor * ln(max(L_Q, 2)))), never below 1.
  std::size_t select_count(std::size_t query_len) const;
};

/// Max-minus-mean of q_i . k_j / sqrt(d) over all keys, one entry per query.
/// q [L_Q x d], k [L_K x d] -> [L_Q]. Not differentiable (selection only).
Tensor sparsity_measure(const Tensor& q, const Tensor& k);

/// Indices of the `count` largest entries, ties resolved toward the lower
/// index, returned in ascending index order.
std::vector<std::size_t> top_queries(std::span<const double> measure, std::size_t count);

/// q [L_Q x d], k [L_K x d], v [L_K x d_v] -> [L_Q x d_v], or the same with a
/// leading group axis [G x ...] where every group is independent.
Tensor probsparse_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const SparsityBudget& budget);
/// Same with an explicit number of active queries per group.
Tensor probsparse_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t active_queries);

struct AttentionParams {
  Tensor query;   // [d_model x d_model]
  Tensor key;     // [d_source x d_model]
  Tensor value;   // [d_source x d_model]
  Tensor output;  // [d_model x d_model]
  std::size_t heads = 8;

  std::size_t model_width() const { return query.dim(1); }
  std::size_t head_width() const { return model_width() / heads; }

  /// Xavier-uniform projections. `source_width` is d_model when attending
  /// over encoder states and d_x when attending over raw inputs.
  static AttentionParams init(std::size_t source_width, std::size_t model_width,
                              std::size_t heads, std::mt19937_64& rng,
                              const std::string& prefix);

  std::vector<Tensor> parameters() const { return {query, key, value, output}; }
};

/// Per-node temporal attention. `sources` [T x rows x d_source] holds every
/// step of the attended sequence, `query_state` [rows x d_model] the final
/// encoder state. Each row (node of a sample) attends only over its own T
/// entries. Returns the context [rows x d_model].
Tensor attend_context(const AttentionParams& params, const Tensor& sources,
                      const Tensor& query_state, const SparsityBudget& budget);

}  // namespace glowcast
