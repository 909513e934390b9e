// SPDX-License-Identifier: Apache-2.0
//
// End-to-end run: ingest, impute, smooth, split, train, evaluate. The CLI
// and the acceptance suite both drive these functions.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "glowcast/data/panel.hpp"
#include "glowcast/data/windowing.hpp"
#include "glowcast/eval/metrics.hpp"
#include "glowcast/model/seq2seq.hpp"
#include "glowcast/model/trainer.hpp"

namespace glowcast {

struct PipelineConfig {
  double sigma = 2.0;  // Gaussian smoothing width in days
  SplitRatios ratios;
  std::size_t var_order = 3;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  PipelineConfig pipeline;
  std::string data;        // panel CSV
  std::uint64_t seed = 0;  // copied into model.seed and train.seed by resolve()
  std::size_t workers = 1;

  /// Applies the run seed and the panel's station count, then validates.
  void resolve(std::size_t stations);
};

nlohmann::json to_json(const RunConfig& config);
/// Lenient about absent keys, strict about unknown ones (ConfigError).
void merge_json(const nlohmann::json& j, RunConfig& config);

/// Historical-average imputation (training share of the ratios), then smoothing.
StationPanel preprocess(const StationPanel& raw, const PipelineConfig& config);

/// preprocess + split_normalize_window with the model's T and H.
PreparedData prepare(const StationPanel& raw, const RunConfig& config);

struct TrainedRun {
  Seq2SeqModel model;
  TrainResult result;
};

TrainedRun train_run(const RunConfig& config, const PreparedData& data,
                     const EpochCallback& on_epoch = {});

struct Evaluation {
  std::vector<MetricReport> reports;  // model first, then HA and VAR if requested
  WindowForecast truth;
  WindowForecast forecast;  // the model's, physical units
};

inline constexpr const char* kModelName = "TransGlow";

/// Scores the model on the test windows, plus HA and VAR fitted on the
/// training split when `baselines` is set.
Evaluation evaluate_run(const Seq2SeqModel& model, const PreparedData& data,
                        const RunConfig& config, bool baselines);

/// Long-format CSV: date,station,truth,prediction for every test window and step.
void write_predictions_csv(const Evaluation& eval, const std::vector<std::string>& station_ids,
                           std::ostream& out);

}  // namespace glowcast
