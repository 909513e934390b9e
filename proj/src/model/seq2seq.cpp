// SPDX-License-Identifier: Apache-2.0
#include "glowcast/model/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "glowcast/error.hpp"
#include "glowcast/numerics/ops.hpp"
#include "glowcast/numerics/tape.hpp"

namespace glowcast {
namespace {

Affine make_affine(std::size_t in, std::size_t out, std::mt19937_64& rng, const std::string& name) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out);
  for (double& v : w) v = dist(rng);
  return {Tensor::parameter({in, out}, std::move(w), name + ".weight"),
          Tensor::parameter({out}, std::vector<double>(out, 0.0), name + ".bias")};
}

// [I; 0]: the decoder starts from the encoder's final state and the context
// contribution is learned from zero.
Affine passthrough_affine(std::size_t dh, const std::string& name) {
  std::vector<double> w(2 * dh * dh, 0.0);
  for (std::size_t i = 0; i < dh; ++i) w[i * dh + i] = 1.0;
  return {Tensor::parameter({2 * dh, dh}, std::move(w), name + ".weight"),
          Tensor::parameter({dh}, std::vector<double>(dh, 0.0), name + ".bias")};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("model config: " + what);
}

}  // namespace

std::string to_string(AttentionSource source) {
  return source == AttentionSource::kEncoder ? "encoder" : "raw";
}

AttentionSource parse_attention_source(const std::string& text) {
  if (text == "encoder") return AttentionSource::kEncoder;
  if (text == "raw") return AttentionSource::kRaw;
  throw ConfigError("attention source must be 'encoder' or 'raw', got '" + text + "'");
}

void ModelConfig::validate() const {
  require(stations >= 1, "stations must be at least 1");
  require(input_width >= 1, "input width must be at least 1");
  require(hidden_width >= 1, "hidden width must be at least 1");
  require(layers >= 1, "layers must be at least 1");
  require(history_len >= 1, "history length T must be at least 1");
  require(horizon >= 1, "horizon H must be at least 1");
  require(heads >= 1, "heads must be at least 1");
  require(hidden_width % heads == 0, "hidden width " + std::to_string(hidden_width) +
                                         " is not divisible by " + std::to_string(heads) + " heads");
  require(embed_width >= 1, "embedding width must be at least 1");
  require(sparsity_factor > 0.0, "sparsity factor must be positive");
}

Tensor apply(const Affine& layer, const Tensor& x) {
  return ops::add_bias(ops::matmul(x, layer.weight), layer.bias);
}

Seq2SeqModel Seq2SeqModel::init(const ModelConfig& config) {
  config.validate();
  Seq2SeqModel m;
  m.config = config;
  m.graph = init_embeddings(config.stations, config.embed_width, config.seed);

  std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ULL + 1);
  const std::size_t dx = config.input_width, dh = config.hidden_width;
  for (std::size_t l = 0; l < config.layers; ++l)
    m.encoder.push_back(GcrnCell::init(l == 0 ? dx : dh, dh, rng, "encoder." + std::to_string(l)));
  for (std::size_t l = 0; l < config.layers; ++l)
    m.decoder.push_back(GcrnCell::init(l == 0 ? dx : dh, dh, rng, "decoder." + std::to_string(l)));
  m.readout = make_affine(dh, dx, rng, "readout");
  if (config.use_attention) {
    const std::size_t source = config.attention_source == AttentionSource::kEncoder ? dh : dx;
    m.attention = AttentionParams::init(source, dh, config.heads, rng, "attention");
    for (std::size_t l = 0; l < config.layers; ++l)
      m.augment.push_back(passthrough_affine(dh, "augment." + std::to_string(l)));
  }
  return m;
}

std::vector<Tensor> Seq2SeqModel::parameters() const {
  std::vector<Tensor> out{graph.source, graph.target};
  for (const auto* stack : {&encoder, &decoder})
    for (const GcrnCell& cell : *stack)
      for (const Tensor& t : cell.parameters()) out.push_back(t);
  out.push_back(readout.weight);
  out.push_back(readout.bias);
  if (config.use_attention) {
    for (const Tensor& t : attention.parameters()) out.push_back(t);
    for (const Affine& a : augment) {
      out.push_back(a.weight);
      out.push_back(a.bias);
    }
  }
  return out;
}

std::size_t count_parameters(const Seq2SeqModel& model) {
  std::size_t total = 0;
  for (const Tensor& t : model.parameters()) total += t.numel();
  return total;
}

Encoding encode(const Seq2SeqModel& model, const Tensor& adj, std::span<const Tensor> inputs) {
  const auto& cfg = model.config;
  if (inputs.size() != cfg.history_len)
    throw DimensionError("encode: expected " + std::to_string(cfg.history_len) + " frames, got " +
                         std::to_string(inputs.size()));
  const std::size_t rows = inputs.front().dim(0);
  if (rows % cfg.stations != 0)
    throw DimensionError("encode: " + std::to_string(rows) + " rows is not a multiple of " +
                         std::to_string(cfg.stations) + " stations");

  Encoding enc;
  std::vector<Tensor> h(cfg.layers, Tensor::zeros({rows, cfg.hidden_width}));
  for (const Tensor& x : inputs) {
    Tensor below = x;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      h[l] = gcrn_step(model.encoder[l], adj, below, h[l]);
      below = h[l];
    }
    enc.states.push_back(below);
  }
  enc.finals = std::move(h);
  return enc;
}

Tensor augment_hidden(const Affine& projection, const Tensor& final_state, const Tensor& context) {
  if (final_state.shape() != context.shape())
    throw DimensionError("augment_hidden: state " + shape_string(final_state.shape()) +
                         " vs context " + shape_string(context.shape()));
  return apply(projection, ops::concat_last_dim(final_state, context));
}

std::vector<Tensor> decode(const Seq2SeqModel& model, const Tensor& adj,
                           std::span<const Tensor> initial_states, const Tensor& first_input,
                           std::size_t horizon, std::span<const Tensor> teacher,
                           double sampling_prob, std::mt19937_64* rng) {
  const auto& cfg = model.config;
  if (initial_states.size() != cfg.layers)
    throw DimensionError("decode: need one initial state per layer");
  if (!(sampling_prob >= 0.0 && sampling_prob <= 1.0))
    throw ContractError("decode: sampling probability must lie in [0, 1]");
  if (sampling_prob > 0.0 && horizon > 1 && teacher.size() < horizon - 1)
    throw ContractError("decode: teacher frames are required when sampling probability > 0");
  if (sampling_prob > 0.0 && sampling_prob < 1.0 && horizon > 1 && rng == nullptr)
    throw ContractError("decode: scheduled sampling needs a random generator");

  std::vector<Tensor> h(initial_states.begin(), initial_states.end());
  std::vector<Tensor> outputs;
  Tensor input = first_input;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t k = 0; k < horizon; ++k) {
    if (k > 0) {
      bool use_teacher = sampling_prob >= 1.0;
      if (sampling_prob > 0.0 && sampling_prob < 1.0) use_teacher = coin(*rng) < sampling_prob;
      input = use_teacher ? teacher[k - 1] : outputs.back();
    }
    Tensor below = input;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      h[l] = gcrn_step(model.decoder[l], adj, below, h[l]);
      below = h[l];
    }
    outputs.push_back(apply(model.readout, below));
  }
  return outputs;
}

Tensor forward(const Seq2SeqModel& model, std::span<const Tensor> history,
               std::span<const Tensor> teacher, double sampling_prob, std::mt19937_64* rng) {
  const auto& cfg = model.config;
  const Tensor adj = derive_adjacency(model.graph);
  const Encoding enc = encode(model, adj, history);

  std::vector<Tensor> init_states = enc.finals;
  if (cfg.use_attention) {
    const Tensor sources =
        ops::stack(cfg.attention_source == AttentionSource::kEncoder ? std::span<const Tensor>(enc.states)
                                                                     : history);
    const Tensor context = attend_context(model.attention, sources, enc.finals.back(), model.budget());
    for (std::size_t l = 0; l < cfg.layers; ++l)
      init_states[l] = augment_hidden(model.augment[l], enc.finals[l], context);
  }
  const auto outputs = decode(model, adj, init_states, history.back(), cfg.horizon, teacher,
                              sampling_prob, rng);
  return ops::stack(outputs);
}

StepFrames gather_frames(const ForecastBatch& batch, std::span<const std::size_t> indices) {
  const std::size_t n = batch.stations, b = indices.size();
  if (b == 0) throw ContractError("gather_frames: no windows selected");
  StepFrames frames;
  auto collect = [&](std::size_t steps, auto window_of) {
    std::vector<Tensor> out;
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<double> v(b * n);
      for (std::size_t i = 0; i < b; ++i) {
        if (indices[i] >= batch.size()) throw ContractError("gather_frames: window index out of range");
        const auto w = window_of(indices[i]);
        std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(t * n), n, v.begin() + static_cast<std::ptrdiff_t>(i * n));
      }
      out.push_back(Tensor::from({b * n, 1}, std::move(v)));
    }
    return out;
  };
  frames.history = collect(batch.history_len, [&](std::size_t i) { return batch.history_of(i); });
  frames.target = collect(batch.horizon, [&](std::size_t i) { return batch.target_of(i); });
  return frames;
}

std::vector<double> predict_windows(const Seq2SeqModel& model, const ForecastBatch& batch,
                                    std::size_t chunk, std::size_t workers) {
  const auto& cfg = model.config;
  if (batch.stations != cfg.stations || batch.history_len != cfg.history_len ||
      batch.horizon != cfg.horizon || cfg.input_width != 1)
    throw DimensionError("predict: windows do not match the model configuration");
  chunk = std::max<std::size_t>(1, chunk);
  const std::size_t n = cfg.stations, H = cfg.horizon, count = batch.size();
  const std::size_t chunks = (count + chunk - 1) / chunk;
  std::vector<double> out(count * H * n, 0.0);

  // Each worker only reads the parameters and writes its own windows.
  auto run = [&](std::size_t first_chunk, std::size_t stride) {
    NoGradGuard no_grad;
    for (std::size_t c = first_chunk; c < chunks; c += stride) {
      std::vector<std::size_t> idx;
      for (std::size_t i = c * chunk; i < std::min(count, (c + 1) * chunk); ++i) idx.push_back(i);
      const StepFrames frames = gather_frames(batch, idx);
      const Tensor pred = forward(model, frames.history);  // [H x B*n x 1]
      const auto v = pred.values();
      for (std::size_t k = 0; k < H; ++k)
        for (std::size_t b = 0; b < idx.size(); ++b)
          for (std::size_t s = 0; s < n; ++s)
            out[(idx[b] * H + k) * n + s] = v[(k * idx.size() + b) * n + s];
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, chunks));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          run(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace glowcast
