// SPDX-License-Identifier: Apache-2.0
#include "glowcast/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "glowcast/numerics/tape.hpp"

namespace glowcast {

double finite_difference_check(const std::function<Tensor()>& f,
                               std::span<Tensor> params, double eps) {
  Tape::current().clear();
  for (Tensor& p : params) p.zero_grad();
  Tensor loss = f();
  std::vector<std::vector<double>> analytic;
  if (loss.requires_grad()) {
    backward(loss);
  }
  for (Tensor& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.numel(), 0.0);
    }
  }

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto values = params[t].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = f().item();
      values[i] = saved - eps;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::fabs(analytic[t][i] - numeric) / std::max(1.0, std::fabs(numeric));
      if (std::isnan(err)) return err;
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace glowcast
