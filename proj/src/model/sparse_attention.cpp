// SPDX-License-Identifier: Apache-2.0
#include "glowcast/model/sparse_attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glowcast/error.hpp"
#include "glowcast/numerics/kernels.hpp"
#include "glowcast/numerics/ops.hpp"
#include "glowcast/numerics/tape.hpp"

namespace glowcast {
namespace {

struct AttentionDims {
  std::size_t groups, queries, keys, width, value_width;
};

AttentionDims check_dims(const Tensor& q, const Tensor& k, const Tensor& v) {
  const std::size_t rank = q.rank();
  if ((rank != 2 && rank != 3) || k.rank() != rank || v.rank() != rank) {
    throw DimensionError("attention inputs must all be rank 2 or all rank 3, got " +
                         shape_string(q.shape()) + ", " + shape_string(k.shape()) + ", " +
                         shape_string(v.shape()));
  }
  const std::size_t lead = rank - 2;
  AttentionDims d{rank == 3 ? q.dim(0) : 1, q.dim(lead), k.dim(lead), q.dim(lead + 1),
                  v.dim(lead + 1)};
  const bool groups_ok = rank == 2 || (k.dim(0) == d.groups && v.dim(0) == d.groups);
  if (!groups_ok || k.dim(lead + 1) != d.width || v.dim(lead) != d.keys) {
    throw DimensionError("attention shapes inconsistent: q " + shape_string(q.shape()) +
                         ", k " + shape_string(k.shape()) + ", v " + shape_string(v.shape()));
  }
  return d;
}

// scores[i * keys + j] = q_i . k_j * scale
void scaled_scores(const double* q, const double* k, double* scores, std::size_t queries,
                   std::size_t keys, std::size_t width, double scale) {
  std::fill(scores, scores + queries * keys, 0.0);
  kernels::active().gemm_nt(q, k, scores, queries, width, keys);
  for (std::size_t i = 0; i < queries * keys; ++i) scores[i] *= scale;
}

double max_minus_mean(const double* row, std::size_t keys) {
  const double hi = *std::max_element(row, row + keys);
  const double avg = std::accumulate(row, row + keys, 0.0) / static_cast<double>(keys);
  return hi - avg;
}

}  // namespace

std::size_t SparsityBudget::select_count(std::size_t query_len) const {
  if (!(factor > 0.0)) throw ConfigError("sparsity factor must be positive");
  if (query_len == 0) throw ContractError("attention needs at least one query");
  const double len = static_cast<double>(std::max<std::size_t>(query_len, 2));
  const auto u = static_cast<std::size_t>(std::ceil(factor * std::log(len)));
  return std::clamp<std::size_t>(u, 1, query_len);
}

Tensor sparsity_measure(const Tensor& q, const Tensor& k) {
  if (q.rank() != 2 || k.rank() != 2 || q.dim(1) != k.dim(1)) {
    throw DimensionError("sparsity_measure: q " + shape_string(q.shape()) + " vs k " +
                         shape_string(k.shape()));
  }
  const std::size_t lq = q.dim(0), lk = k.dim(0), d = q.dim(1);
  std::vector<double> scores(lq * lk);
  scaled_scores(q.values().data(), k.values().data(), scores.data(), lq, lk, d,
                1.0 / std::sqrt(static_cast<double>(d)));
  std::vector<double> measure(lq);
  for (std::size_t i = 0; i < lq; ++i) measure[i] = max_minus_mean(scores.data() + i * lk, lk);
  return Tensor::from({lq}, std::move(measure));
}

std::vector<std::size_t> top_queries(std::span<const double> measure, std::size_t count) {
  std::vector<std::size_t> order(measure.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return measure[a] > measure[b]; });
  order.resize(std::min(count, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

Tensor probsparse_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const SparsityBudget& budget) {
  const AttentionDims d = check_dims(q, k, v);
  return probsparse_attention(q, k, v, budget.select_count(d.queries));
}

Tensor probsparse_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t active_queries) {
  const AttentionDims d = check_dims(q, k, v);
  if (active_queries == 0 || active_queries > d.queries) {
    throw ContractError("active query count " + std::to_string(active_queries) +
                        " outside [1, " + std::to_string(d.queries) + "]");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.width));
  const std::size_t u = active_queries;
  const std::size_t q_block = d.queries * d.width, k_block = d.keys * d.width;
  const std::size_t v_block = d.keys * d.value_width, o_block = d.queries * d.value_width;

  std::vector<double> out(d.groups * o_block, 0.0);
  // Saved for the adjoint: selected query indices and their attention rows.
  std::vector<std::size_t> selected(d.groups * u);
  std::vector<double> probs(d.groups * u * d.keys);
  std::vector<double> scores(d.queries * d.keys);
  std::vector<double> mean_v(d.value_width);
  const auto& kt = kernels::active();

  for (std::size_t g = 0; g < d.groups; ++g) {
    const double* qg = q.values().data() + g * q_block;
    const double* kg = k.values().data() + g * k_block;
    const double* vg = v.values().data() + g * v_block;
    double* og = out.data() + g * o_block;

    scaled_scores(qg, kg, scores.data(), d.queries, d.keys, d.width, scale);
    std::vector<double> measure(d.queries);
    for (std::size_t i = 0; i < d.queries; ++i)
      measure[i] = max_minus_mean(scores.data() + i * d.keys, d.keys);
    const auto chosen = top_queries(measure, u);

    std::fill(mean_v.begin(), mean_v.end(), 0.0);
    for (std::size_t j = 0; j < d.keys; ++j) kt.axpy(1.0, vg + j * d.value_width, mean_v.data(), d.value_width);
    for (double& x : mean_v) x /= static_cast<double>(d.keys);

    std::vector<char> is_active(d.queries, 0);
    for (std::size_t s = 0; s < u; ++s) {
      const std::size_t i = chosen[s];
      is_active[i] = 1;
      selected[g * u + s] = i;
      const double* row = scores.data() + i * d.keys;
      double* p = probs.data() + (g * u + s) * d.keys;
      const double hi = *std::max_element(row, row + d.keys);
      double total = 0.0;
      for (std::size_t j = 0; j < d.keys; ++j) {
        p[j] = std::exp(row[j] - hi);
        total += p[j];
      }
      for (std::size_t j = 0; j < d.keys; ++j) p[j] /= total;
      for (std::size_t j = 0; j < d.keys; ++j) kt.axpy(p[j], vg + j * d.value_width, og + i * d.value_width, d.value_width);
    }
    for (std::size_t i = 0; i < d.queries; ++i) {
      if (!is_active[i]) std::copy(mean_v.begin(), mean_v.end(), og + i * d.value_width);
    }
  }

  Shape shape = q.shape();
  shape.back() = d.value_width;
  const bool track = grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad());
  Tensor result = Tensor::from(std::move(shape), std::move(out));
  result.set_requires_grad(track);
  if (track) {
    Tape::current().record(
        "probsparse_attention", result, {q, k, v},
        [q, k, v, result, d, u, scale, selected = std::move(selected), probs = std::move(probs)] {
          const auto& kt = kernels::active();
          const double* gout = result.grad().data();
          const std::size_t q_block = d.queries * d.width, k_block = d.keys * d.width;
          const std::size_t v_block = d.keys * d.value_width, o_block = d.queries * d.value_width;
          double* gq = q.requires_grad() ? q.grad_buffer().data() : nullptr;
          double* gk = k.requires_grad() ? k.grad_buffer().data() : nullptr;
          double* gv = v.requires_grad() ? v.grad_buffer().data() : nullptr;
          std::vector<double> dp(d.keys);
          for (std::size_t g = 0; g < d.groups; ++g) {
            const double* qg = q.values().data() + g * q_block;
            const double* kg = k.values().data() + g * k_block;
            const double* vg = v.values().data() + g * v_block;
            const double* go = gout + g * o_block;
            std::vector<char> is_active(d.queries, 0);
            for (std::size_t s = 0; s < u; ++s) is_active[selected[g * u + s]] = 1;

            // Mean fallback rows feed every value row equally.
            if (gv != nullptr) {
              const double share = 1.0 / static_cast<double>(d.keys);
              for (std::size_t i = 0; i < d.queries; ++i) {
                if (is_active[i]) continue;
                for (std::size_t j = 0; j < d.keys; ++j)
                  kt.axpy(share, go + i * d.value_width, gv + g * v_block + j * d.value_width, d.value_width);
              }
            }
            for (std::size_t s = 0; s < u; ++s) {
              const std::size_t i = selected[g * u + s];
              const double* p = probs.data() + (g * u + s) * d.keys;
              const double* goi = go + i * d.value_width;
              double inner = 0.0;
              for (std::size_t j = 0; j < d.keys; ++j) {
                dp[j] = kt.dot(goi, vg + j * d.value_width, d.value_width);
                inner += p[j] * dp[j];
                if (gv != nullptr) kt.axpy(p[j], goi, gv + g * v_block + j * d.value_width, d.value_width);
              }
              for (std::size_t j = 0; j < d.keys; ++j) {
                const double ds = p[j] * (dp[j] - inner) * scale;
                if (gq != nullptr) kt.axpy(ds, kg + j * d.width, gq + g * q_block + i * d.width, d.width);
                if (gk != nullptr) kt.axpy(ds, qg + i * d.width, gk + g * k_block + j * d.width, d.width);
              }
            }
          }
        });
  }
  return result;
}

AttentionParams AttentionParams::init(std::size_t source_width, std::size_t model_width,
                                      std::size_t heads, std::mt19937_64& rng,
                                      const std::string& prefix) {
  if (heads == 0 || model_width == 0 || model_width % heads != 0) {
    throw ConfigError("attention width " + std::to_string(model_width) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
  auto make = [&](std::size_t in, std::size_t out, const std::string& name) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> w(in * out);
    for (double& x : w) x = dist(rng);
    return Tensor::parameter({in, out}, std::move(w), prefix + "." + name);
  };
  AttentionParams p;
  p.query = make(model_width, model_width, "query");
  p.key = make(source_width, model_width, "key");
  p.value = make(source_width, model_width, "value");
  p.output = make(model_width, model_width, "output");
  p.heads = heads;
  return p;
}

Tensor attend_context(const AttentionParams& params, const Tensor& sources,
                      const Tensor& query_state, const SparsityBudget& budget) {
  const std::size_t dm = params.model_width();
  if (sources.rank() != 3 || query_state.rank() != 2 || sources.dim(1) != query_state.dim(0) ||
      sources.dim(2) != params.key.dim(0) || query_state.dim(1) != params.query.dim(0)) {
    throw DimensionError("attend_context: sources " + shape_string(sources.shape()) +
                         " and query " + shape_string(query_state.shape()) +
                         " do not fit projections of width " + std::to_string(dm));
  }
  const std::size_t steps = sources.dim(0), rows = sources.dim(1), ds = sources.dim(2);
  const std::size_t heads = params.heads, dh = params.head_width();

  const Tensor flat = ops::reshape(sources, {steps * rows, ds});
  auto per_head_sequence = [&](const Tensor& projection) {
    const Tensor projected = ops::matmul(flat, projection);  // [T*rows x dm]
    return ops::swap_leading_axes(ops::reshape(projected, {steps, rows * heads, dh}));
  };
  const Tensor keys = per_head_sequence(params.key);      // [rows*heads x T x dh]
  const Tensor values = per_head_sequence(params.value);  // [rows*heads x T x dh]
  const Tensor queries =
      ops::reshape(ops::matmul(query_state, params.query), {rows * heads, 1, dh});
  const Tensor attended = probsparse_attention(queries, keys, values, budget);
  return ops::matmul(ops::reshape(attended, {rows, dm}), params.output);
}

}  // namespace glowcast
