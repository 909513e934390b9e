// SPDX-License-Identifier: Apache-2.0
#include "glowcast/data/preprocess.hpp"

#include <array>
#include <cmath>
#include <cstdlib>

#include "glowcast/error.hpp"
#include "glowcast/numerics/kernels.hpp"

namespace glowcast {
namespace {

using namespace std::chrono;

// Month/day slot 0..365 with Feb 29 folded onto Feb 28.
std::size_t calendar_slot(const year_month_day& ymd) {
  static constexpr std::array<unsigned, 12> offset{0,   31,  59,  90,  120, 151,
                                                   181, 212, 243, 273, 304, 334};
  const unsigned m = static_cast<unsigned>(ymd.month());
  unsigned d = static_cast<unsigned>(ymd.day());
  if (m == 2 && d == 29) d = 28;
  return offset[m - 1] + d - 1;
}

}  // namespace

StationPanel impute_historical_average(const StationPanel& panel, double train_ratio) {
  if (!(train_ratio > 0.0 && train_ratio <= 1.0)) throw ConfigError("train ratio must be in (0, 1]");
  const std::size_t days = panel.days(), n = panel.stations();

  std::vector<std::size_t> slot(days);
  std::vector<int> year_of(days);
  std::array<std::vector<std::size_t>, 365> by_slot;
  for (std::size_t d = 0; d < days; ++d) {
    const year_month_day ymd{panel.dates[d]};
    slot[d] = calendar_slot(ymd);
    year_of[d] = static_cast<int>(ymd.year());
    by_slot[slot[d]].push_back(d);
  }

  const std::size_t prefix = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(days))));
  StationPanel out = panel;
  for (std::size_t s = 0; s < n; ++s) {
    double prefix_sum = 0.0, all_sum = 0.0;
    std::size_t prefix_count = 0, all_count = 0;
    for (std::size_t d = 0; d < days; ++d) {
      const double v = panel.at(d, s);
      if (is_missing(v)) continue;
      all_sum += v;
      ++all_count;
      if (d < prefix) {
        prefix_sum += v;
        ++prefix_count;
      }
    }
    if (all_count == 0) throw IngestError("station " + panel.station_ids[s] + " has no observations");
    const double fallback = prefix_count ? prefix_sum / static_cast<double>(prefix_count)
                                         : all_sum / static_cast<double>(all_count);

    for (std::size_t d = 0; d < days; ++d) {
      if (!is_missing(panel.at(d, s))) continue;
      double num = 0.0, den = 0.0;
      for (std::size_t other : by_slot[slot[d]]) {
        const int gap = std::abs(year_of[other] - year_of[d]);
        const double v = panel.at(other, s);
        if (gap == 0 || is_missing(v)) continue;
        const double w = 1.0 / gap;
        num += w * v;
        den += w;
      }
      out.at(d, s) = den > 0.0 ? num / den : fallback;
    }
  }
  return out;
}

std::vector<double> gaussian_half_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("smoothing sigma must be positive");
  const auto radius = static_cast<std::size_t>(std::floor(4.0 * sigma));
  std::vector<double> w(radius + 1);
  for (std::size_t k = 0; k <= radius; ++k) {
    const double x = static_cast<double>(k);
    w[k] = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  return w;
}

StationPanel gaussian_smooth(const StationPanel& panel, double sigma) {
  const std::vector<double> w = gaussian_half_kernel(sigma);
  if (panel.missing_count() != 0) throw ContractError("smoothing needs a panel without gaps");
  const auto& k = kernels::active();
  const std::size_t days = panel.days(), n = panel.stations();
  const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(w.size()) - 1;

  StationPanel out = panel;
  std::fill(out.values.begin(), out.values.end(), 0.0);
  // Rows are days, so each tap is one axpy across all stations.
  for (std::size_t d = 0; d < days; ++d) {
    const auto di = static_cast<std::ptrdiff_t>(d);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, di - radius);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(days) - 1, di + radius);
    double total = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) total += w[static_cast<std::size_t>(std::abs(j - di))];
    double* row = out.values.data() + d * n;
    for (std::ptrdiff_t j = lo; j <= hi; ++j)
      k.axpy(w[static_cast<std::size_t>(std::abs(j - di))] / total,
             panel.values.data() + static_cast<std::size_t>(j) * n, row, n);
  }
  return out;
}

}  // namespace glowcast
