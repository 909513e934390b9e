// SPDX-License-Identifier: Apache-2.0
//
// Encoder-decoder forecaster. A stack of GCRN cells encodes the history, a
// temporal attention layer pools the encoder states into a context per node,
// [final state, context] is projected back to the hidden width to seed the
// decoder, and the decoder rolls out the horizon one step at a time.
//
// Every signal is node-major: a batch of B samples over n stations is a
// [B*n x width] tensor per time step.
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "glowcast/data/windowing.hpp"
#include "glowcast/model/gcrn.hpp"
#include "glowcast/model/graph_learning.hpp"
#include "glowcast/model/sparse_attention.hpp"

namespace glowcast {

enum class AttentionSource { kEncoder, kRaw };

std::string to_string(AttentionSource source);
/// "encoder" or "raw"; anything else throws ConfigError.
AttentionSource parse_attention_source(const std::string& text);

struct ModelConfig {
  std::size_t stations = 1;
  std::size_t input_width = 1;
  std::size_t hidden_width = 64;
  std::size_t layers = 1;
  std::size_t history_len = 12;
  std::size_t horizon = 12;
  std::size_t heads = 8;
  std::size_t embed_width = 10;
  AttentionSource attention_source = AttentionSource::kEncoder;
  bool use_attention = true;
  double sparsity_factor = 5.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first bad field.
  void validate() const;
};

struct Affine {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

Tensor apply(const Affine& layer, const Tensor& x);

struct Seq2SeqModel {
  ModelConfig config;
  LearnedGraph graph;
  std::vector<GcrnCell> encoder;
  std::vector<GcrnCell> decoder;
  Affine readout;                // [d_h x d_x]
  AttentionParams attention;     // empty when use_attention is off
  std::vector<Affine> augment;   // one [2 d_h x d_h] per layer, same

  /// Graph from `seed`, then cells, readout and attention from one generator,
  /// in that order, so a model without attention shares every other initial
  /// value with its attention-enabled twin. Augment starts at [I; 0], so the
  /// two twins also make identical initial predictions.
  static Seq2SeqModel init(const ModelConfig& config);

  /// Trainable tensors in a fixed order; each carries its module path as name.
  std::vector<Tensor> parameters() const;
  SparsityBudget budget() const { return {config.sparsity_factor}; }
};

std::size_t count_parameters(const Seq2SeqModel& model);

struct Encoding {
  std::vector<Tensor> states;  // top layer, one [rows x d_h] per step
  std::vector<Tensor> finals;  // last state of every layer
};

/// Zero initial state; inputs holds T frames of [rows x d_x].
Encoding encode(const Seq2SeqModel& model, const Tensor& adj, std::span<const Tensor> inputs);

/// [final, context] * W + b. Both operands must have the same shape.
Tensor augment_hidden(const Affine& projection, const Tensor& final_state, const Tensor& context);

/// Rolls out `horizon` steps from per-layer initial states. Step 1 consumes
/// `first_input`; step k > 1 consumes teacher[k-2] with probability
/// `sampling_prob` (one draw per step for the whole batch) and the previous
/// prediction otherwise. Throws ContractError if sampling_prob > 0 without a
/// full teacher sequence, or 0 < sampling_prob < 1 without a generator.
std::vector<Tensor> decode(const Seq2SeqModel& model, const Tensor& adj,
                           std::span<const Tensor> initial_states, const Tensor& first_input,
                           std::size_t horizon, std::span<const Tensor> teacher,
                           double sampling_prob, std::mt19937_64* rng);

/// History frames -> predictions [H x rows x d_x].
Tensor forward(const Seq2SeqModel& model, std::span<const Tensor> history,
               std::span<const Tensor> teacher = {}, double sampling_prob = 0.0,
               std::mt19937_64* rng = nullptr);

/// Per-step frames for the windows at `indices`: history T x [B*n x 1],
/// target H x [B*n x 1].
struct StepFrames {
  std::vector<Tensor> history;
  std::vector<Tensor> target;
};
StepFrames gather_frames(const ForecastBatch& batch, std::span<const std::size_t> indices);

/// Normalized predictions for every window, [windows x H x n] row-major like
/// ForecastBatch::target. Windows are processed in chunks of `chunk` and
/// sharded over `workers` threads; the result does not depend on either.
std::vector<double> predict_windows(const Seq2SeqModel& model, const ForecastBatch& batch,
                                    std::size_t chunk = 64, std::size_t workers = 1);

}  // namespace glowcast
