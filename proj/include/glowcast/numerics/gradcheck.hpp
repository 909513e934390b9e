// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>

#include "glowcast/numerics/tensor.hpp"

namespace glowcast {

inline constexpr double kFiniteDifferenceStep = 1e-5;

/// Compares the tape gradient of a scalar function against central
/// differences, entry by entry over `params`.
///
/// Returns max |analytic - numeric| / max(1, |numeric|). `f` must be
/// deterministic and rebuild its graph from the current parameter values on
/// every call. Existing gradients on `params` are overwritten.
double finite_difference_check(const std::function<Tensor()>& f,
                               std::span<Tensor> params,
                               double eps = kFiniteDifferenceStep);

}  // namespace glowcast
