// SPDX-License-Identifier: Apache-2.0
//
// JSON forms of the model and training configs. Reading is lenient about
// absent keys (they keep their current value) and strict about unknown ones.
#pragma once

#include <json.hpp>

#include "glowcast/model/seq2seq.hpp"
#include "glowcast/model/trainer.hpp"

namespace glowcast {

nlohmann::json to_json(const ModelConfig& config);
nlohmann::json to_json(const TrainConfig& config);

/// Overwrites the fields present in `j`. Throws ConfigError on unknown keys
/// or values of the wrong type.
void merge_json(const nlohmann::json& j, ModelConfig& config);
void merge_json(const nlohmann::json& j, TrainConfig& config);

}  // namespace glowcast
