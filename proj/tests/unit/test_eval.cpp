// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Eigenvalues>

#include "glowcast/data/panel.hpp"
#include "glowcast/data/synth.hpp"
#include "glowcast/data/windowing.hpp"
#include "glowcast/error.hpp"
#include "glowcast/eval/baselines.hpp"
#include "glowcast/eval/metrics.hpp"

using namespace glowcast;
using namespace std::chrono;

namespace {

StationPanel panel_from(Date start, std::size_t days, std::size_t n, std::vector<double> values) {
  StationPanel p;
  for (std::size_t s = 0; s < n; ++s) p.station_ids.push_back("s" + std::to_string(s));
  for (std::size_t d = 0; d < days; ++d) p.dates.push_back(start + std::chrono::days{static_cast<long>(d)});
  p.values = std::move(values);
  return p;
}

// x_t = A x_{t-1} + noise with A scaled to the requested spectral radius.
struct VarData {
  Eigen::MatrixXd a;
  StationPanel panel;
};

VarData simulate_var1(std::size_t n, std::size_t samples, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  const Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  a *= radius / es.eigenvalues().cwiseAbs().maxCoeff();

  std::vector<double> values(samples * n);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t burn = 0; burn < 200; ++burn) {
    Eigen::VectorXd e(n);
    for (auto& v : e) v = normal(rng);
    x = a * x + e;
  }
  for (std::size_t t = 0; t < samples; ++t) {
    Eigen::VectorXd e(n);
    for (auto& v : e) v = normal(rng);
    x = a * x + e;
    for (std::size_t s = 0; s < n; ++s) values[t * n + s] = x(static_cast<Eigen::Index>(s));
  }
  return {a, panel_from(sys_days{2000y / 1 / 1}, samples, n, std::move(values))};
}

WindowForecast forecast_of(const ForecastBatch& b, std::vector<double> values) {
  WindowForecast f;
  f.horizon = b.horizon;
  f.stations = b.stations;
  f.window_end = b.window_end;
  f.values = std::move(values);
  return f;
}

}  // namespace

TEST_CASE("mae and rmse examples") {
  const std::vector<double> truth{1.0, 2.0, 3.0};
  CHECK(mae(truth, truth) == 0.0);
  CHECK(rmse(truth, truth) == 0.0);
  const std::vector<double> shifted{3.0, 4.0, 5.0};
  CHECK(mae(shifted, truth) == 2.0);
  CHECK(rmse(shifted, truth) == 2.0);
  const std::vector<double> p{1.0, -3.0}, z{0.0, 0.0};
  CHECK(mae(p, z) == 2.0);
  CHECK(rmse(p, z) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  CHECK(rmse(p, z) == doctest::Approx(2.2360).epsilon(1e-4));
  CHECK_THROWS_AS(mae(p, truth), DimensionError);
  CHECK_THROWS_AS(rmse(p, truth), DimensionError);
  CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), ContractError);
}

TEST_CASE("rmse is never below mae") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + trial % 17), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = u(rng), b[i] = u(rng);
    CHECK(rmse(a, b) >= mae(a, b) * (1 - 1e-15));
  }
}

TEST_CASE("calendar slots") {
  CHECK(calendar_slot(sys_days{2001y / 1 / 1}) == 0);
  CHECK(calendar_slot(sys_days{2001y / 3 / 1}) == 60);
  CHECK(calendar_slot(sys_days{2004y / 3 / 1}) == 60);
  CHECK(calendar_slot(sys_days{2004y / 2 / 29}) == 59);
  CHECK(calendar_slot(sys_days{2004y / 12 / 31}) == 365);
  CHECK(calendar_slot(sys_days{2003y / 12 / 31}) == 365);
}

TEST_CASE("historical average examples") {
  SUBCASE("one training year is replayed") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::vector<double> v(366 * 2);
    for (double& x : v) x = u(rng);
    const StationPanel train = panel_from(sys_days{2004y / 1 / 1}, 366, 2, v);
    const HaModel m = ha_fit(train);
    const std::vector<double> out = ha_forecast(m, train.dates);
    CHECK(out == v);
    // next year, same calendar days
    CHECK(m.predict(sys_days{2005y / 7 / 4}, 1) == train.at(calendar_slot(sys_days{2004y / 7 / 4}), 1));
  }
  SUBCASE("two years with 10 and 30 on a day give 20") {
    std::vector<double> v(730, 0.0);
    v[40] = 10.0;
    v[365 + 40] = 30.0;
    const HaModel m = ha_fit(panel_from(sys_days{2001y / 1 / 1}, 730, 1, v));
    CHECK(m.predict(sys_days{2010y / 2 / 10}, 0) == 20.0);
  }
  SUBCASE("unseen Feb 29 uses Feb 28, unseen days the station mean") {
    std::vector<double> v(100);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    const HaModel m = ha_fit(panel_from(sys_days{2001y / 1 / 1}, 100, 1, v));
    CHECK(m.predict(sys_days{2004y / 2 / 29}, 0) == 58.0);
    CHECK(m.predict(sys_days{2004y / 8 / 1}, 0) == 49.5);
  }
  CHECK_THROWS_AS(ha_fit(StationPanel{}), ContractError);
}

TEST_CASE("historical-average metric cells are identical across horizons") {
  SynthOptions o;
  o.stations = 3;
  o.days = 1200;
  const SynthDataset ds = synth_generate(o);
  const PreparedData data = split_normalize_window(ds.panel, {}, 12, 12);
  const HaModel ha = ha_fit(data.train_raw);
  const MetricReport r =
      build_report("HA", ha_forecast_windows(ha, data.test), denormalized_targets(data.test, data.stats));
  REQUIRE(r.horizons.size() == 3);
  CHECK(r.at(3).mae == r.at(6).mae);
  CHECK(r.at(3).mae == r.at(12).mae);
  CHECK(r.at(3).rmse == r.at(6).rmse);
  CHECK(r.at(3).rmse == r.at(12).rmse);
  CHECK(r.at(3).samples == r.at(12).samples);
  // every cell covers the window count minus the 9-day spread, times n
  CHECK(r.at(3).samples == (data.test.size() - 9) * 3);
  CHECK(r.overall.samples == data.test.size() * 12 * 3);
}

TEST_CASE("build_report") {
  const std::size_t n = 2, h = 12;
  ForecastBatch b;
  b.horizon = h;
  b.stations = n;
  for (int w = 0; w < 15; ++w) b.window_end.push_back(sys_days{2020y / 1 / 1} + days{w});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> truth(b.window_end.size() * h * n), pred(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = u(rng), pred[i] = u(rng);

  const MetricReport r = build_report("m", forecast_of(b, pred), forecast_of(b, truth));
  // Oracle: windows whose step-h date falls in [end_0 + 12, end_14 + 3], i.e. 6 windows per cell.
  for (std::size_t cell : {3u, 6u, 12u}) {
    double abs_sum = 0, sq = 0;
    std::size_t count = 0;
    for (std::size_t w = 0; w < b.window_end.size(); ++w) {
      const long offset = static_cast<long>(w + cell);
      if (offset < 12 || offset > 14 + 3) continue;
      for (std::size_t s = 0; s < n; ++s) {
        const double e = pred[(w * h + cell - 1) * n + s] - truth[(w * h + cell - 1) * n + s];
        abs_sum += std::fabs(e);
        sq += e * e;
        ++count;
      }
    }
    CHECK(count == 12);
    CHECK(r.at(cell).samples == count);
    CHECK(r.at(cell).mae == doctest::Approx(abs_sum / 12).epsilon(1e-14));
    CHECK(r.at(cell).rmse == doctest::Approx(std::sqrt(sq / 12)).epsilon(1e-14));
  }
  CHECK(r.overall.mae == doctest::Approx(mae(pred, truth)).epsilon(1e-14));
  CHECK(r.overall.rmse == doctest::Approx(rmse(pred, truth)).epsilon(1e-14));

  const MetricReport back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  CHECK(back.at(6).mae == r.at(6).mae);
  CHECK(back.overall.rmse == r.overall.rmse);
  const std::vector<MetricReport> both{r, back};
  CHECK(format_table(both).find("h=12") != std::string::npos);

  SUBCASE("only horizons up to H are reported") {
    ForecastBatch short_b = b;
    short_b.horizon = 4;
    std::vector<double> t(b.window_end.size() * 4 * n, 1.0), p(t.size(), 2.0);
    const MetricReport s = build_report("m", forecast_of(short_b, p), forecast_of(short_b, t));
    REQUIRE(s.horizons.size() == 1);
    CHECK(s.horizons[0].horizon == 3);
    CHECK_THROWS_AS(s.at(6), ContractError);
  }
  SUBCASE("mismatched inputs") {
    WindowForecast t = forecast_of(b, truth);
    t.values.pop_back();
    CHECK_THROWS_AS(build_report("m", forecast_of(b, pred), t), DimensionError);
  }
}

TEST_CASE("VAR(1) recovers a known stable system") {
  const VarData d = simulate_var1(4, 5000, 0.8, 21);
  const VarModel m = var_fit(d.panel, 1);
  double worst = 0.0;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      worst = std::max(worst, std::fabs(m.a(0, r, c) - d.a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
  MESSAGE("max-abs coefficient error " << worst);
  CHECK(worst < 0.05);
  for (double c : m.intercept) CHECK(std::fabs(c) < 0.1);
}

TEST_CASE("VAR(1) on white noise finds no dynamics") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(3.0, 1.0);
  std::vector<double> v(5000 * 3);
  for (double& x : v) x = normal(rng);
  const VarModel m = var_fit(panel_from(sys_days{2000y / 1 / 1}, 5000, 3, v), 1);
  double worst = 0.0;
  for (double a : m.coef) worst = std::max(worst, std::fabs(a));
  CHECK(worst < 0.05);
}

TEST_CASE("VAR forecasts") {
  const VarData d = simulate_var1(3, 600, 0.7, 2);
  const VarModel m = var_fit(d.panel, 2);
  const std::size_t n = 3;
  std::vector<double> hist(d.panel.values.end() - 5 * n, d.panel.values.end());

  SUBCASE("one step is c + sum A_i x_{t-i}") {
    const std::vector<double> f = var_forecast(m, hist, 1);
    REQUIRE(f.size() == n);
    for (std::size_t r = 0; r < n; ++r) {
      double v = m.intercept[r];
      for (std::size_t lag = 0; lag < 2; ++lag)
        for (std::size_t c = 0; c < n; ++c) v += m.a(lag, r, c) * hist[(4 - lag) * n + c];
      CHECK(f[r] == v);
    }
  }
  SUBCASE("longer forecasts iterate the one-step map") {
    const std::vector<double> f = var_forecast(m, hist, 4);
    std::vector<double> rolled = hist;
    for (int k = 0; k < 4; ++k) {
      const std::vector<double> step = var_forecast(m, rolled, 1);
      rolled.insert(rolled.end(), step.begin(), step.end());
    }
    CHECK(std::vector<double>(rolled.end() - 4 * n, rolled.end()) == f);
  }
  SUBCASE("in-sample one-step MSE beats the intercept-only model") {
    double model_sq = 0, mean_sq = 0;
    std::vector<double> mean(n, 0.0);
    for (std::size_t t = 0; t < 600; ++t)
      for (std::size_t s = 0; s < n; ++s) mean[s] += d.panel.at(t, s) / 600.0;
    for (std::size_t t = 2; t < 600; ++t) {
      const std::span<const double> h(d.panel.values.data() + (t - 2) * n, 2 * n);
      const std::vector<double> f = var_forecast(m, h, 1);
      for (std::size_t s = 0; s < n; ++s) {
        model_sq += std::pow(f[s] - d.panel.at(t, s), 2);
        mean_sq += std::pow(mean[s] - d.panel.at(t, s), 2);
      }
    }
    CHECK(model_sq < mean_sq);
  }
  CHECK_THROWS_AS(var_forecast(m, std::span<const double>(hist).first(n), 1), DimensionError);
}

TEST_CASE("VAR fit errors") {
  const VarData d = simulate_var1(3, 40, 0.5, 8);
  CHECK_THROWS_AS(var_fit(d.panel, 10), ContractError);  // 40 <= 3*10 + 10
  CHECK_NOTHROW(var_fit(d.panel, 3));
  CHECK_THROWS_AS(var_fit(d.panel, 0), ContractError);

  StationPanel flat = simulate_var1(3, 500, 0.5, 8).panel;
  for (std::size_t t = 0; t < flat.days(); ++t) flat.at(t, 1) = 42.0;
  CHECK_THROWS_AS(var_fit(flat, 2), FitError);
}
