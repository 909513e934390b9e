// SPDX-License-Identifier: Apache-2.0
//
// MAE / RMSE and the per-horizon report shared by the model and baselines.
// Horizon cells score the forecast made exactly h steps ahead, not the
// average over steps 1..h.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "glowcast/data/panel.hpp"
#include "glowcast/data/windowing.hpp"

namespace glowcast {

/// Throws DimensionError on a size mismatch, ContractError when empty.
double mae(std::span<const double> pred, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);

inline constexpr std::size_t kReportHorizons[] = {3, 6, 12};

struct MetricCell {
  std::size_t horizon = 0;  // 0 for the overall cell
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t samples = 0;
};

struct MetricReport {
  std::string method;
  std::vector<MetricCell> horizons;  // only the report horizons <= H
  MetricCell overall;

  const MetricCell& at(std::size_t horizon) const;
  /// Throws NumericError unless every cell is finite, >= 0 and has RMSE >= MAE.
  void check() const;
};

/// Physical-unit forecasts for a set of windows: values are
/// [windows x H x n] and window_end[i] is the date of window i's last input.
struct WindowForecast {
  std::size_t horizon = 0;
  std::size_t stations = 0;
  std::vector<Date> window_end;
  std::vector<double> values;

  std::size_t size() const { return window_end.size(); }
  double at(std::size_t window, std::size_t step, std::size_t station) const {
    return values[(window * horizon + step) * stations + station];
  }
};

/// Scores `pred` against `truth` (same windows, same layout). Every horizon
/// cell is computed over the same set of target dates: those that every
/// reported horizon reaches. Errors are accumulated in date order, so a
/// forecaster that ignores the issue date scores identically in every cell.
/// The overall cell covers all windows and steps.
MetricReport build_report(const std::string& method, const WindowForecast& pred,
                          const WindowForecast& truth);

/// ForecastBatch targets mapped back to physical units.
WindowForecast denormalized_targets(const ForecastBatch& batch, const NormStats& stats);
/// Normalized [windows x H x n] values (e.g. model output) in physical units.
WindowForecast denormalized(const ForecastBatch& batch, std::span<const double> normalized,
                            const NormStats& stats);

nlohmann::json to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

/// Fixed-width table, one row per method, MAE and RMSE per horizon cell.
std::string format_table(std::span<const MetricReport> reports);

}  // namespace glowcast
