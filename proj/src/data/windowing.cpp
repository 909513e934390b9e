// SPDX-License-Identifier: Apache-2.0
#include "glowcast/data/windowing.hpp"

#include <cmath>

#include "glowcast/error.hpp"

namespace glowcast {

NormStats compute_norm_stats(const StationPanel& panel, std::size_t rows) {
  if (rows == 0 || rows > panel.days()) throw ContractError("normalization rows out of range");
  const std::size_t n = panel.stations();
  NormStats stats{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t s = 0; s < n; ++s) {
    double total = 0.0;
    for (std::size_t d = 0; d < rows; ++d) total += panel.at(d, s);
    const double mean = total / static_cast<double>(rows);
    double sq = 0.0;
    for (std::size_t d = 0; d < rows; ++d) {
      const double e = panel.at(d, s) - mean;
      sq += e * e;
    }
    const double sd = std::sqrt(sq / static_cast<double>(rows));
    if (!std::isfinite(mean) || !(sd > 1e-12 * std::max(1.0, std::fabs(mean))))
      throw IngestError("station " + panel.station_ids[s] + " is constant over the training split");
    stats.mean[s] = mean;
    stats.stddev[s] = sd;
  }
  return stats;
}

StationPanel normalize_panel(const StationPanel& panel, const NormStats& stats) {
  if (stats.stations() != panel.stations()) throw DimensionError("stats do not match the panel");
  StationPanel out = panel;
  for (std::size_t d = 0; d < panel.days(); ++d)
    for (std::size_t s = 0; s < panel.stations(); ++s)
      out.at(d, s) = stats.normalize(panel.at(d, s), s);
  return out;
}

std::size_t window_count(std::size_t length, std::size_t history_len, std::size_t horizon) {
  const std::size_t span = history_len + horizon;
  return length >= span ? length - span + 1 : 0;
}

ForecastBatch make_windows(const StationPanel& normalized, std::size_t history_len,
                           std::size_t horizon) {
  if (history_len == 0 || horizon == 0) throw ConfigError("T and H must be at least 1");
  const std::size_t n = normalized.stations();
  ForecastBatch batch;
  batch.history_len = history_len;
  batch.horizon = horizon;
  batch.stations = n;
  const std::size_t count = window_count(normalized.days(), history_len, horizon);
  batch.history.reserve(count * history_len * n);
  batch.target.reserve(count * horizon * n);
  const double* base = normalized.values.data();
  for (std::size_t i = 0; i < count; ++i) {
    batch.history.insert(batch.history.end(), base + i * n, base + (i + history_len) * n);
    batch.target.insert(batch.target.end(), base + (i + history_len) * n,
                        base + (i + history_len + horizon) * n);
    batch.window_end.push_back(normalized.dates[i + history_len - 1]);
  }
  return batch;
}

ForecastBatch ForecastBatch::subset(std::span<const std::size_t> indices) const {
  ForecastBatch out;
  out.history_len = history_len;
  out.horizon = horizon;
  out.stations = stations;
  for (std::size_t i : indices) {
    if (i >= size()) throw ContractError("window index out of range");
    const auto h = history_of(i), t = target_of(i);
    out.history.insert(out.history.end(), h.begin(), h.end());
    out.target.insert(out.target.end(), t.begin(), t.end());
    out.window_end.push_back(window_end[i]);
  }
  return out;
}

SplitSizes split_sizes(std::size_t days, const SplitRatios& r) {
  if (!(r.train > 0.0 && r.val >= 0.0 && r.test >= 0.0) ||
      std::fabs(r.train + r.val + r.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative, with a positive train share, and sum to 1");
  const double len = static_cast<double>(days);
  SplitSizes s;
  s.train = static_cast<std::size_t>(std::llround(r.train * len));
  s.val = static_cast<std::size_t>(std::llround(r.val * len));
  if (s.train + s.val > days) s.val = days - s.train;
  s.test = days - s.train - s.val;
  return s;
}

PreparedData split_normalize_window(const StationPanel& panel, const SplitRatios& ratios,
                                    std::size_t history_len, std::size_t horizon) {
  if (history_len == 0 || horizon == 0) throw ConfigError("T and H must be at least 1");
  if (panel.days() < history_len + horizon + 10)
    throw ConfigError("panel has " + std::to_string(panel.days()) + " days, need at least T + H + 10 = " +
                      std::to_string(history_len + horizon + 10));
  if (panel.missing_count() != 0) throw ContractError("impute the panel before windowing");

  PreparedData out;
  out.sizes = split_sizes(panel.days(), ratios);
  if (out.sizes.train < 2) throw ConfigError("training split is too short");
  out.stats = compute_norm_stats(panel, out.sizes.train);
  out.train_raw = panel.slice(0, out.sizes.train);
  out.val_raw = panel.slice(out.sizes.train, out.sizes.val);
  out.test_raw = panel.slice(out.sizes.train + out.sizes.val, out.sizes.test);
  out.train = make_windows(normalize_panel(out.train_raw, out.stats), history_len, horizon);
  out.val = make_windows(normalize_panel(out.val_raw, out.stats), history_len, horizon);
  out.test = make_windows(normalize_panel(out.test_raw, out.stats), history_len, horizon);
  return out;
}

}  // namespace glowcast
