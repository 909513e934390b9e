// SPDX-License-Identifier: Apache-2.0
//
// Historical-average and vector-autoregression baselines, both fitted on the
// training split in physical units.
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "glowcast/data/panel.hpp"
#include "glowcast/data/windowing.hpp"
#include "glowcast/eval/metrics.hpp"

namespace glowcast {

/// Calendar slot 0..365 (month/day, Feb 29 has its own slot 59).
std::size_t calendar_slot(Date date);

struct HaModel {
  std::size_t stations = 0;
  std::vector<double> slot_mean;     // [366 x n], NaN where the slot is unseen
  std::vector<double> station_mean;  // fallback for unseen slots

  /// Mean of the training values on the same calendar day. Feb 29 falls back
  /// to Feb 28, any other unseen day to the station's training mean.
  double predict(Date date, std::size_t station) const;
};

/// Throws ContractError on an empty panel or missing values.
HaModel ha_fit(const StationPanel& train);
/// [dates x n]
std::vector<double> ha_forecast(const HaModel& model, std::span<const Date> dates);
/// Forecast for every window of `batch`; the issue date is ignored.
WindowForecast ha_forecast_windows(const HaModel& model, const ForecastBatch& batch);

struct VarModel {
  std::size_t order = 0;
  std::size_t stations = 0;
  std::vector<double> intercept;  // [n]
  std::vector<double> coef;       // [p x n x n]; coef[i] multiplies x_{t-1-i}

  double a(std::size_t lag, std::size_t row, std::size_t col) const {
    return coef[(lag * stations + row) * stations + col];
  }
};

inline constexpr double kVarRidge = 1e-8;

/// Least squares for x_t = c + sum_i A_i x_{t-i} via the ridge-jittered
/// normal equations. ContractError unless days > n*p + 10; FitError when the
/// system is singular anyway.
VarModel var_fit(const StationPanel& train, std::size_t order);
/// `history` is [rows x n] with rows >= p, oldest first; returns [H x n].
std::vector<double> var_forecast(const VarModel& model, std::span<const double> history,
                                 std::size_t horizon);
/// Iterated forecasts from every window's (denormalized) history.
WindowForecast var_forecast_windows(const VarModel& model, const ForecastBatch& batch,
                                    const NormStats& stats);

}  // namespace glowcast
