// SPDX-License-Identifier: Apache-2.0
#include "glowcast/data/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "glowcast/error.hpp"

namespace glowcast {
namespace {

struct StationProfile {
  double base, amplitude, phase, persistence, rain_prob, rain_scale, jitter;
};

}  // namespace

std::vector<double> river_network(std::size_t stations, std::uint64_t seed) {
  if (stations == 0) throw ConfigError("need at least one station");
  std::mt19937_64 rng(seed ^ 0x5eed'0f'41'7e'55ULL);
  std::uniform_real_distribution<double> weight(0.4, 0.8);
  std::vector<double> c(stations * stations, 0.0);
  for (std::size_t i = 0; i + 1 < stations; ++i) {
    const std::size_t reach = std::min<std::size_t>(3, stations - 1 - i);
    const std::size_t down = i + 1 + std::uniform_int_distribution<std::size_t>(0, reach - 1)(rng);
    c[i * stations + down] = weight(rng);
  }
  return c;
}

SynthDataset synth_generate(const SynthOptions& o) {
  const std::size_t n = o.stations, days = o.days;
  if (n == 0 || days == 0) throw ConfigError("stations and days must be positive");
  if (o.lag == 0) throw ConfigError("coupling lag must be at least one day");
  SynthDataset out;
  out.coupling = o.coupling.empty() ? river_network(n, o.seed) : o.coupling;
  if (out.coupling.size() != n * n)
    throw ConfigError("coupling matrix must be " + std::to_string(n) + "x" + std::to_string(n));
  for (double w : out.coupling)
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("coupling weights must be finite and non-negative");

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<StationProfile> prof(n);
  for (auto& p : prof) {
    p.base = 20.0 + 60.0 * unit(rng);
    p.amplitude = p.base * (0.3 + 0.3 * unit(rng));
    p.phase = 2.0 * std::numbers::pi * unit(rng);
    p.persistence = 0.8 + 0.15 * unit(rng);
    p.rain_prob = 0.05 + 0.05 * unit(rng);
    p.rain_scale = p.base * (0.3 + 0.4 * unit(rng));
    p.jitter = 0.02 * p.base;
  }

  auto& panel = out.panel;
  for (std::size_t s = 0; s < n; ++s) panel.station_ids.push_back("S" + std::to_string(s));
  panel.dates.resize(days);
  panel.values.assign(days * n, 0.0);
  out.seasonal.assign(days * n, 0.0);

  std::vector<double> anomaly(n, 0.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double omega = 2.0 * std::numbers::pi / 365.25;
  for (std::size_t t = 0; t < days; ++t) {
    panel.dates[t] = o.start + std::chrono::days{static_cast<long>(t)};
    for (std::size_t s = 0; s < n; ++s) {
      const auto& p = prof[s];
      double shock = p.jitter * gauss(rng);
      if (unit(rng) < p.rain_prob) shock += -p.rain_scale * std::log1p(-unit(rng));
      anomaly[s] = p.persistence * anomaly[s] + shock;
      double det = p.base + p.amplitude * std::sin(omega * static_cast<double>(t) + p.phase);
      double flow = det + anomaly[s];
      if (t >= o.lag) {
        for (std::size_t u = 0; u < n; ++u) {
          const double w = out.coupling[u * n + s];
          if (w == 0.0) continue;
          det += w * out.seasonal[(t - o.lag) * n + u];
          flow += w * panel.values[(t - o.lag) * n + u];
        }
      }
      out.seasonal[t * n + s] = det;
      panel.values[t * n + s] = flow;
    }
  }
  return out;
}

}  // namespace glowcast
