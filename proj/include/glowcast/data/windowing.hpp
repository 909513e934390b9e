// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "glowcast/data/panel.hpp"

namespace glowcast {

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

/// Per-station z-score parameters from the training split.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t stations() const { return mean.size(); }
  double normalize(double v, std::size_t s) const { return (v - mean[s]) / stddev[s]; }
  double denormalize(double z, std::size_t s) const { return z * stddev[s] + mean[s]; }
};

/// Mean and population standard deviation of rows [0, rows). Throws
/// IngestError for a station that is constant over those rows.
NormStats compute_norm_stats(const StationPanel& panel, std::size_t rows);

/// Stride-1 (history, target) pairs with a single feature per station.
/// history is [count x T x n], target is [count x H x n], both row-major.
struct ForecastBatch {
  std::size_t history_len = 0;
  std::size_t horizon = 0;
  std::size_t stations = 0;
  std::vector<double> history;
  std::vector<double> target;
  std::vector<Date> window_end;  // date of the last history step

  std::size_t size() const { return window_end.size(); }
  bool empty() const { return window_end.empty(); }
  std::span<const double> history_of(std::size_t i) const {
    return {history.data() + i * history_len * stations, history_len * stations};
  }
  std::span<const double> target_of(std::size_t i) const {
    return {target.data() + i * horizon * stations, horizon * stations};
  }
  ForecastBatch subset(std::span<const std::size_t> indices) const;
};

/// Number of windows a split of `length` days yields.
std::size_t window_count(std::size_t length, std::size_t history_len, std::size_t horizon);

/// All windows over rows of `normalized`, which must be gap-free.
ForecastBatch make_windows(const StationPanel& normalized, std::size_t history_len,
                           std::size_t horizon);

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};

/// llround of the train and val shares, test takes the remainder.
SplitSizes split_sizes(std::size_t days, const SplitRatios& ratios);

struct PreparedData {
  SplitSizes sizes;
  NormStats stats;
  StationPanel train_raw, val_raw, test_raw;  // physical units
  ForecastBatch train, val, test;             // z-scored
};

/// Chronological split, z-score with training statistics, then windows built
/// inside each split. Throws ConfigError when the panel is shorter than
/// T + H + 10 days or the ratios are invalid.
PreparedData split_normalize_window(const StationPanel& panel, const SplitRatios& ratios,
                                    std::size_t history_len, std::size_t horizon);

StationPanel normalize_panel(const StationPanel& panel, const NormStats& stats);

}  // namespace glowcast
