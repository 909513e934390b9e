// SPDX-License-Identifier: Apache-2.0
#include "glowcast/app/pipeline.hpp"

#include <ostream>
#include <set>

#include "glowcast/data/preprocess.hpp"
#include "glowcast/error.hpp"
#include "glowcast/eval/baselines.hpp"
#include "glowcast/model/config_json.hpp"

namespace glowcast {
namespace {

using nlohmann::json;

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void check_keys(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown " + std::string(what) + " config key '" + key + "'");
}

}  // namespace

void RunConfig::resolve(std::size_t stations) {
  model.seed = seed;
  train.seed = seed;
  model.stations = stations;
  model.validate();
  train.validate();
  if (!(pipeline.sigma > 0.0)) throw ConfigError("pipeline: sigma must be positive");
  if (pipeline.var_order == 0) throw ConfigError("pipeline: VAR order must be at least 1");
  if (workers == 0) throw ConfigError("workers must be at least 1");
}

json to_json(const RunConfig& c) {
  return {{"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"pipeline",
           {{"sigma", c.pipeline.sigma},
            {"ratios", {c.pipeline.ratios.train, c.pipeline.ratios.val, c.pipeline.ratios.test}},
            {"var_order", c.pipeline.var_order}}},
          {"data", c.data},
          {"seed", c.seed},
          {"workers", c.workers}};
}

void merge_json(const json& j, RunConfig& c) {
  check_keys(j, {"model", "train", "pipeline", "data", "seed", "workers"}, "run");
  if (j.contains("model")) merge_json(j.at("model"), c.model);
  if (j.contains("train")) merge_json(j.at("train"), c.train);
  if (j.contains("pipeline")) {
    const json& p = j.at("pipeline");
    check_keys(p, {"sigma", "ratios", "var_order"}, "pipeline");
    take(p, "sigma", c.pipeline.sigma);
    take(p, "var_order", c.pipeline.var_order);
    if (p.contains("ratios")) {
      std::vector<double> r;
      take(p, "ratios", r);
      if (r.size() != 3) throw ConfigError("pipeline ratios must have three entries");
      c.pipeline.ratios = {r[0], r[1], r[2]};
    }
  }
  take(j, "data", c.data);
  take(j, "seed", c.seed);
  take(j, "workers", c.workers);
}

StationPanel preprocess(const StationPanel& raw, const PipelineConfig& config) {
  return gaussian_smooth(impute_historical_average(raw, config.ratios.train), config.sigma);
}

PreparedData prepare(const StationPanel& raw, const RunConfig& config) {
  return split_normalize_window(preprocess(raw, config.pipeline), config.pipeline.ratios,
                                config.model.history_len, config.model.horizon);
}

TrainedRun train_run(const RunConfig& config, const PreparedData& data, const EpochCallback& on_epoch) {
  TrainedRun run{Seq2SeqModel::init(config.model), {}};
  run.result = train(run.model, data.train, data.val, config.train, data.stats, on_epoch);
  return run;
}

Evaluation evaluate_run(const Seq2SeqModel& model, const PreparedData& data, const RunConfig& config,
                        bool baselines) {
  if (data.test.empty()) throw ConfigError("evaluate: the test split has no windows");
  Evaluation e;
  e.truth = denormalized_targets(data.test, data.stats);
  e.forecast = denormalized(data.test, predict_windows(model, data.test, 64, config.workers), data.stats);
  e.reports.push_back(build_report(kModelName, e.forecast, e.truth));
  if (baselines) {
    e.reports.push_back(build_report("HA", ha_forecast_windows(ha_fit(data.train_raw), data.test), e.truth));
    const VarModel var = var_fit(data.train_raw, config.pipeline.var_order);
    e.reports.push_back(build_report("VAR", var_forecast_windows(var, data.test, data.stats), e.truth));
  }
  return e;
}

void write_predictions_csv(const Evaluation& eval, const std::vector<std::string>& station_ids,
                           std::ostream& out) {
  const WindowForecast& f = eval.forecast;
  if (station_ids.size() != f.stations) throw DimensionError("write_predictions_csv: station ids mismatch");
  out << "issued,step,date,station,truth,prediction\n";
  for (std::size_t w = 0; w < f.size(); ++w)
    for (std::size_t k = 0; k < f.horizon; ++k) {
      const Date date = f.window_end[w] + std::chrono::days{static_cast<long>(k + 1)};
      for (std::size_t s = 0; s < f.stations; ++s)
        out << format_iso_date(f.window_end[w]) << ',' << k + 1 << ',' << format_iso_date(date) << ','
            << station_ids[s] << ',' << format_double(eval.truth.at(w, k, s)) << ','
            << format_double(f.at(w, k, s)) << '\n';
    }
}

}  // namespace glowcast
