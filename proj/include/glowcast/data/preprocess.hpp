// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "glowcast/data/panel.hpp"

namespace glowcast {

inline constexpr double kDefaultSmoothingSigma = 2.0;

/// Fills each gap with the 1/|year distance| weighted mean of the same
/// calendar day in other years (Feb 29 is treated as Feb 28). Gaps with no
/// such observation take the station mean over the leading `train_ratio` of
/// the panel, or over the whole panel when that prefix has no observations.
/// Throws IngestError if a station has no observations at all.
StationPanel impute_historical_average(const StationPanel& panel, double train_ratio = 0.7);

/// Discrete Gaussian kernel exp(-k^2 / 2 sigma^2) for |k| <= floor(4 sigma),
/// unnormalized. Index 0 is the centre.
std::vector<double> gaussian_half_kernel(double sigma);

/// Per-station convolution, kernel renormalized where it hangs over either
/// end of the series. Throws ConfigError for sigma <= 0 and ContractError if
/// the panel still has missing values.
StationPanel gaussian_smooth(const StationPanel& panel, double sigma = kDefaultSmoothingSigma);

}  // namespace glowcast
