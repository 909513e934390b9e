// SPDX-License-Identifier: Apache-2.0
#include "glowcast/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "glowcast/error.hpp"

namespace glowcast {
namespace {

using nlohmann::json;

void check_pair(std::span<const double> pred, std::span<const double> truth, const char* what) {
  if (pred.size() != truth.size())
    throw DimensionError(std::string(what) + ": " + std::to_string(pred.size()) +
                         " predictions vs " + std::to_string(truth.size()) + " targets");
  if (pred.empty()) throw ContractError(std::string(what) + ": no values");
}

struct Accumulator {
  double abs_sum = 0.0, sq_sum = 0.0;
  std::size_t count = 0;

  void add(double e) {
    abs_sum += std::fabs(e);
    sq_sum += e * e;
    ++count;
  }
  MetricCell cell(std::size_t horizon) const {
    const double n = static_cast<double>(count);
    return {horizon, abs_sum / n, std::sqrt(sq_sum / n), count};
  }
};

json cell_json(const MetricCell& c) {
  return {{"horizon", c.horizon}, {"mae", c.mae}, {"rmse", c.rmse}, {"samples", c.samples}};
}

MetricCell cell_from(const json& j) {
  return {j.at("horizon").get<std::size_t>(), j.at("mae").get<double>(),
          j.at("rmse").get<double>(), j.at("samples").get<std::size_t>()};
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "mae");
  Accumulator acc;
  for (std::size_t i = 0; i < pred.size(); ++i) acc.add(pred[i] - truth[i]);
  return acc.cell(0).mae;
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "rmse");
  Accumulator acc;
  for (std::size_t i = 0; i < pred.size(); ++i) acc.add(pred[i] - truth[i]);
  return acc.cell(0).rmse;
}

const MetricCell& MetricReport::at(std::size_t horizon) const {
  for (const MetricCell& c : horizons)
    if (c.horizon == horizon) return c;
  throw ContractError("report '" + method + "' has no horizon " + std::to_string(horizon));
}

void MetricReport::check() const {
  auto verify = [&](const MetricCell& c) {
    const bool ok = std::isfinite(c.mae) && std::isfinite(c.rmse) && c.mae >= 0.0 &&
                    c.rmse >= c.mae * (1.0 - 1e-12) && c.samples > 0;
    if (!ok)
      throw NumericError("report '" + method + "' horizon " + std::to_string(c.horizon) +
                         ": invalid metrics (mae " + std::to_string(c.mae) + ", rmse " +
                         std::to_string(c.rmse) + ")");
  };
  for (const MetricCell& c : horizons) verify(c);
  verify(overall);
}

MetricReport build_report(const std::string& method, const WindowForecast& pred,
                          const WindowForecast& truth) {
  if (pred.horizon != truth.horizon || pred.stations != truth.stations ||
      pred.window_end != truth.window_end || pred.values.size() != truth.values.size())
    throw DimensionError("build_report: forecast and truth cover different windows");
  check_pair(pred.values, truth.values, "build_report");
  const std::size_t n = pred.stations;

  MetricReport report;
  report.method = method;

  std::vector<std::size_t> cells;
  for (std::size_t h : kReportHorizons)
    if (h <= pred.horizon) cells.push_back(h);

  // target date -> windows whose step-h target lands on it, per reported horizon
  std::vector<std::map<Date, std::vector<std::size_t>>> by_date(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (std::size_t w = 0; w < pred.size(); ++w)
      by_date[c][pred.window_end[w] + std::chrono::days{static_cast<long>(cells[c])}].push_back(w);

  std::vector<Date> common;
  if (!cells.empty())
    for (const auto& [date, windows] : by_date[0]) {
      bool everywhere = true;
      for (std::size_t c = 1; c < cells.size(); ++c)
        everywhere = everywhere && by_date[c].count(date) > 0;
      if (everywhere) common.push_back(date);
    }
  if (!cells.empty() && common.empty())
    throw ContractError("build_report: no target date is reached by every reported horizon");

  for (std::size_t c = 0; c < cells.size(); ++c) {
    Accumulator acc;
    for (Date date : common)
      for (std::size_t w : by_date[c].at(date))
        for (std::size_t s = 0; s < n; ++s)
          acc.add(pred.at(w, cells[c] - 1, s) - truth.at(w, cells[c] - 1, s));
    report.horizons.push_back(acc.cell(cells[c]));
  }

  Accumulator all;
  for (std::size_t i = 0; i < pred.values.size(); ++i) all.add(pred.values[i] - truth.values[i]);
  report.overall = all.cell(0);
  report.check();
  return report;
}

WindowForecast denormalized(const ForecastBatch& batch, std::span<const double> normalized,
                            const NormStats& stats) {
  if (normalized.size() != batch.target.size() || stats.stations() != batch.stations)
    throw DimensionError("denormalized: values do not match the window batch");
  WindowForecast out;
  out.horizon = batch.horizon;
  out.stations = batch.stations;
  out.window_end = batch.window_end;
  out.values.resize(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i)
    out.values[i] = stats.denormalize(normalized[i], i % batch.stations);
  return out;
}

WindowForecast denormalized_targets(const ForecastBatch& batch, const NormStats& stats) {
  return denormalized(batch, batch.target, stats);
}

json to_json(const MetricReport& report) {
  json cells = json::array();
  for (const MetricCell& c : report.horizons) cells.push_back(cell_json(c));
  return {{"method", report.method},
          {"units", "physical"},
          {"horizon_convention", "error of the forecast made exactly h steps ahead"},
          {"horizons", cells},
          {"overall", cell_json(report.overall)}};
}

MetricReport report_from_json(const json& j) {
  MetricReport r;
  try {
    r.method = j.at("method").get<std::string>();
    for (const auto& c : j.at("horizons")) r.horizons.push_back(cell_from(c));
    r.overall = cell_from(j.at("overall"));
  } catch (const json::exception& e) {
    throw IngestError(std::string("bad metric report: ") + e.what());
  }
  return r;
}

std::string format_table(std::span<const MetricReport> reports) {
  std::vector<std::size_t> cols;
  for (const MetricReport& r : reports)
    for (const MetricCell& c : r.horizons)
      if (std::find(cols.begin(), cols.end(), c.horizon) == cols.end()) cols.push_back(c.horizon);
  std::sort(cols.begin(), cols.end());

  std::string out = "# MAE / RMSE in physical units; horizon h = error exactly h steps ahead\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-12s", "method");
  out += buf;
  for (std::size_t h : cols) {
    std::snprintf(buf, sizeof buf, " | h=%-2zu %9s %9s", h, "MAE", "RMSE");
    out += buf;
  }
  std::snprintf(buf, sizeof buf, " | %-4s %9s %9s\n", "all", "MAE", "RMSE");
  out += buf;
  for (const MetricReport& r : reports) {
    std::snprintf(buf, sizeof buf, "%-12s", r.method.c_str());
    out += buf;
    for (std::size_t h : cols) {
      const auto it = std::find_if(r.horizons.begin(), r.horizons.end(),
                                   [&](const MetricCell& c) { return c.horizon == h; });
      if (it == r.horizons.end())
        std::snprintf(buf, sizeof buf, " | %-4s %9s %9s", "", "-", "-");
      else
        std::snprintf(buf, sizeof buf, " | %-4s %9.4f %9.4f", "", it->mae, it->rmse);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, " | %-4s %9.4f %9.4f\n", "", r.overall.mae, r.overall.rmse);
    out += buf;
  }
  return out;
}

}  // namespace glowcast
