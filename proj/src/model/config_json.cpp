// SPDX-License-Identifier: Apache-2.0
#include "glowcast/model/config_json.hpp"

#include <set>

#include "glowcast/error.hpp"

namespace glowcast {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown " + std::string(what) + " config key '" + key + "'");
}

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"stations", c.stations},
          {"input_width", c.input_width},
          {"hidden_width", c.hidden_width},
          {"layers", c.layers},
          {"history_len", c.history_len},
          {"horizon", c.horizon},
          {"heads", c.heads},
          {"embed_width", c.embed_width},
          {"attention_source", to_string(c.attention_source)},
          {"use_attention", c.use_attention},
          {"sparsity_factor", c.sparsity_factor},
          {"seed", c.seed}};
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},   {"max_epochs", c.max_epochs},
          {"patience", c.patience},       {"base_lr", c.base_lr},
          {"lr_decay", c.lr_decay},       {"milestones", c.milestones},
          {"curriculum_tau", c.curriculum_tau}, {"clip_norm", c.clip_norm},
          {"seed", c.seed}};
}

void merge_json(const json& j, ModelConfig& c) {
  check_keys(j,
             {"stations", "input_width", "hidden_width", "layers", "history_len", "horizon", "heads",
              "embed_width", "attention_source", "use_attention", "sparsity_factor", "seed"},
             "model");
  take(j, "stations", c.stations);
  take(j, "input_width", c.input_width);
  take(j, "hidden_width", c.hidden_width);
  take(j, "layers", c.layers);
  take(j, "history_len", c.history_len);
  take(j, "horizon", c.horizon);
  take(j, "heads", c.heads);
  take(j, "embed_width", c.embed_width);
  std::string source = to_string(c.attention_source);
  take(j, "attention_source", source);
  c.attention_source = parse_attention_source(source);
  take(j, "use_attention", c.use_attention);
  take(j, "sparsity_factor", c.sparsity_factor);
  take(j, "seed", c.seed);
}

void merge_json(const json& j, TrainConfig& c) {
  check_keys(j,
             {"batch_size", "max_epochs", "patience", "base_lr", "lr_decay", "milestones",
              "curriculum_tau", "clip_norm", "seed"},
             "train");
  take(j, "batch_size", c.batch_size);
  take(j, "max_epochs", c.max_epochs);
  take(j, "patience", c.patience);
  take(j, "base_lr", c.base_lr);
  take(j, "lr_decay", c.lr_decay);
  take(j, "milestones", c.milestones);
  take(j, "curriculum_tau", c.curriculum_tau);
  take(j, "clip_norm", c.clip_norm);
  take(j, "seed", c.seed);
}

}  // namespace glowcast
