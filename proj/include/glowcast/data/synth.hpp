// SPDX-License-Identifier: Apache-2.0
//
// Synthetic river networks for desk-scale runs. Each station's flow is a
// seasonal sinusoid plus an AR(1) anomaly driven by sparse, right-skewed
// rain shocks, plus lagged flow from the stations upstream of it.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "glowcast/data/panel.hpp"

namespace glowcast {

struct SynthOptions {
  std::size_t stations = 8;
  std::size_t days = 4000;
  std::uint64_t seed = 7;
  /// Row-major [n x n]; entry (i, j) is the share of station i's flow that
  /// reaches station j after `lag` days. Empty means river_network(n, seed).
  std::vector<double> coupling;
  std::size_t lag = 1;
  Date start = Date{std::chrono::year{2000} / 1 / 1};
};

struct SynthDataset {
  StationPanel panel;
  std::vector<double> coupling;  // ground-truth graph, [n x n]
  /// Deterministic part of each station's flow (own seasonal cycle plus what
  /// arrives from upstream), [days x n]. panel minus this is pure noise.
  std::vector<double> seasonal;
};

/// Random tree draining towards the highest index: every station except the
/// last feeds one station 1 to 3 indices further down with weight in [0.4, 0.8].
std::vector<double> river_network(std::size_t stations, std::uint64_t seed);

/// Throws ConfigError on zero stations/days, a malformed coupling matrix, a
/// zero lag, or negative weights.
SynthDataset synth_generate(const SynthOptions& options);

}  // namespace glowcast
