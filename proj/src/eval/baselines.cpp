// SPDX-License-Identifier: Apache-2.0
#include "glowcast/eval/baselines.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "glowcast/error.hpp"

namespace glowcast {
namespace {

constexpr std::size_t kSlots = 366;
constexpr std::size_t kFeb28 = 58, kFeb29 = 59;
constexpr unsigned kMonthStart[12] = {0, 31, 60, 91, 121, 152, 182, 213, 244, 274, 305, 335};

// Below this reciprocal condition number the jittered system is treated as
// singular: the ridge no longer dominates rounding error.
constexpr double kMinRcond = 1e-13;

void require_complete(const StationPanel& panel, const char* what) {
  if (panel.days() == 0 || panel.stations() == 0)
    throw ContractError(std::string(what) + ": empty training panel");
  if (panel.missing_count() != 0)
    throw ContractError(std::string(what) + ": training panel has missing values");
}

}  // namespace

std::size_t calendar_slot(Date date) {
  const std::chrono::year_month_day ymd{date};
  return kMonthStart[static_cast<unsigned>(ymd.month()) - 1] + static_cast<unsigned>(ymd.day()) - 1;
}

double HaModel::predict(Date date, std::size_t station) const {
  std::size_t slot = calendar_slot(date);
  if (slot == kFeb29 && std::isnan(slot_mean[slot * stations + station])) slot = kFeb28;
  const double v = slot_mean[slot * stations + station];
  return std::isnan(v) ? station_mean[station] : v;
}

HaModel ha_fit(const StationPanel& train) {
  require_complete(train, "ha_fit");
  const std::size_t n = train.stations();
  std::vector<double> sum(kSlots * n, 0.0);
  std::vector<std::size_t> count(kSlots, 0);
  HaModel m;
  m.stations = n;
  m.station_mean.assign(n, 0.0);
  for (std::size_t d = 0; d < train.days(); ++d) {
    const std::size_t slot = calendar_slot(train.dates[d]);
    ++count[slot];
    for (std::size_t s = 0; s < n; ++s) {
      sum[slot * n + s] += train.at(d, s);
      m.station_mean[s] += train.at(d, s);
    }
  }
  for (double& v : m.station_mean) v /= static_cast<double>(train.days());
  m.slot_mean.assign(kSlots * n, kMissing);
  for (std::size_t slot = 0; slot < kSlots; ++slot)
    if (count[slot] > 0)
      for (std::size_t s = 0; s < n; ++s)
        m.slot_mean[slot * n + s] = sum[slot * n + s] / static_cast<double>(count[slot]);
  return m;
}

std::vector<double> ha_forecast(const HaModel& model, std::span<const Date> dates) {
  std::vector<double> out(dates.size() * model.stations);
  for (std::size_t d = 0; d < dates.size(); ++d)
    for (std::size_t s = 0; s < model.stations; ++s) out[d * model.stations + s] = model.predict(dates[d], s);
  return out;
}

WindowForecast ha_forecast_windows(const HaModel& model, const ForecastBatch& batch) {
  if (batch.stations != model.stations) throw DimensionError("ha_forecast_windows: station count mismatch");
  WindowForecast out;
  out.horizon = batch.horizon;
  out.stations = batch.stations;
  out.window_end = batch.window_end;
  out.values.resize(batch.size() * batch.horizon * batch.stations);
  for (std::size_t w = 0; w < batch.size(); ++w)
    for (std::size_t k = 0; k < batch.horizon; ++k) {
      const Date target = batch.window_end[w] + std::chrono::days{static_cast<long>(k + 1)};
      for (std::size_t s = 0; s < batch.stations; ++s)
        out.values[(w * batch.horizon + k) * batch.stations + s] = model.predict(target, s);
    }
  return out;
}

VarModel var_fit(const StationPanel& train, std::size_t order) {
  require_complete(train, "var_fit");
  if (order == 0) throw ContractError("var_fit: lag order must be at least 1");
  const std::size_t n = train.stations(), days = train.days();
  if (days <= n * order + 10)
    throw ContractError("var_fit: " + std::to_string(days) + " training days, need more than " +
                        std::to_string(n * order + 10) + " for " + std::to_string(n) +
                        " stations at lag " + std::to_string(order));

  const Eigen::Index rows = static_cast<Eigen::Index>(days - order);
  const Eigen::Index width = static_cast<Eigen::Index>(1 + n * order);
  const Eigen::Index nn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd x(rows, width), y(rows, nn);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::size_t t = static_cast<std::size_t>(r) + order;
    x(r, 0) = 1.0;
    for (std::size_t lag = 0; lag < order; ++lag)
      for (std::size_t s = 0; s < n; ++s)
        x(r, static_cast<Eigen::Index>(1 + lag * n + s)) = train.at(t - 1 - lag, s);
    for (std::size_t s = 0; s < n; ++s) y(r, static_cast<Eigen::Index>(s)) = train.at(t, s);
  }

  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += kVarRidge;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= kMinRcond))
    throw FitError("var_fit: normal equations are singular (lag " + std::to_string(order) +
                   "); a station may be constant or collinear with others");
  const Eigen::MatrixXd beta = llt.solve(x.transpose() * y);
  if (!beta.allFinite()) throw FitError("var_fit: non-finite coefficients");

  VarModel m;
  m.order = order;
  m.stations = n;
  m.intercept.resize(n);
  m.coef.resize(order * n * n);
  for (std::size_t r = 0; r < n; ++r) {
    m.intercept[r] = beta(0, static_cast<Eigen::Index>(r));
    for (std::size_t lag = 0; lag < order; ++lag)
      for (std::size_t c = 0; c < n; ++c)
        m.coef[(lag * n + r) * n + c] =
            beta(static_cast<Eigen::Index>(1 + lag * n + c), static_cast<Eigen::Index>(r));
  }
  return m;
}

std::vector<double> var_forecast(const VarModel& model, std::span<const double> history,
                                 std::size_t horizon) {
  const std::size_t n = model.stations, p = model.order;
  if (n == 0 || history.size() % n != 0 || history.size() / n < p)
    throw DimensionError("var_forecast: history must hold at least " + std::to_string(p) +
                         " rows of " + std::to_string(n) + " stations");
  // Rolling buffer: the last p rows of history followed by the forecasts.
  std::vector<double> buf(history.end() - static_cast<std::ptrdiff_t>(p * n), history.end());
  buf.resize((p + horizon) * n);
  for (std::size_t k = 0; k < horizon; ++k) {
    const std::size_t t = p + k;
    for (std::size_t r = 0; r < n; ++r) {
      double v = model.intercept[r];
      for (std::size_t lag = 0; lag < p; ++lag) {
        const double* prev = buf.data() + (t - 1 - lag) * n;
        for (std::size_t c = 0; c < n; ++c) v += model.a(lag, r, c) * prev[c];
      }
      buf[t * n + r] = v;
    }
  }
  return {buf.begin() + static_cast<std::ptrdiff_t>(p * n), buf.end()};
}

WindowForecast var_forecast_windows(const VarModel& model, const ForecastBatch& batch,
                                    const NormStats& stats) {
  const std::size_t n = batch.stations;
  if (n != model.stations || stats.stations() != n)
    throw DimensionError("var_forecast_windows: station count mismatch");
  WindowForecast out;
  out.horizon = batch.horizon;
  out.stations = n;
  out.window_end = batch.window_end;
  out.values.reserve(batch.size() * batch.horizon * n);
  std::vector<double> history(batch.history_len * n);
  for (std::size_t w = 0; w < batch.size(); ++w) {
    const auto z = batch.history_of(w);
    for (std::size_t i = 0; i < z.size(); ++i) history[i] = stats.denormalize(z[i], i % n);
    const std::vector<double> f = var_forecast(model, history, batch.horizon);
    out.values.insert(out.values.end(), f.begin(), f.end());
  }
  return out;
}

}  // namespace glowcast
