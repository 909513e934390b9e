// SPDX-License-Identifier: Apache-2.0
#include "glowcast/model/gcrn.hpp"

#include <cmath>

#include "glowcast/error.hpp"
#include "glowcast/numerics/ops.hpp"

namespace glowcast {
namespace {

Tensor affine(const Tensor& mixed, const GraphConvParams& params) {
  return ops::add_bias(ops::matmul(mixed, params.weight), params.bias);
}

GraphConvParams make_conv(std::size_t in, std::size_t out, double bias_value,
                          std::mt19937_64& rng, const std::string& name) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out);
  for (double& v : w) v = dist(rng);
  return {Tensor::parameter({in, out}, std::move(w), name + ".weight"),
          Tensor::parameter({out}, std::vector<double>(out, bias_value), name + ".bias")};
}

}  // namespace

Tensor graph_conv(const Tensor& adj, const Tensor& h_in, const GraphConvParams& params) {
  if (h_in.rank() != 2 || h_in.dim(1) != params.in_width()) {
    throw DimensionError("graph_conv: signal " + shape_string(h_in.shape()) +
                         " does not match weight " + shape_string(params.weight.shape()));
  }
  return affine(ops::graph_propagate(adj, h_in), params);
}

GcrnCell GcrnCell::init(std::size_t input_width, std::size_t hidden_width,
                        std::mt19937_64& rng, const std::string& prefix) {
  if (input_width == 0 || hidden_width == 0) {
    throw ConfigError("GCRN cell widths must be positive");
  }
  const std::size_t in = input_width + hidden_width;
  GcrnCell cell;
  cell.reset = make_conv(in, hidden_width, 0.0, rng, prefix + ".reset");
  cell.update = make_conv(in, hidden_width, 1.0, rng, prefix + ".update");
  cell.candidate = make_conv(in, hidden_width, 0.0, rng, prefix + ".candidate");
  return cell;
}

std::vector<Tensor> GcrnCell::parameters() const {
  return {reset.weight, reset.bias, update.weight, update.bias, candidate.weight, candidate.bias};
}

Tensor gcrn_step(const GcrnCell& cell, const Tensor& adj, const Tensor& x_t,
                 const Tensor& h_prev) {
  const std::size_t dh = cell.hidden_width();
  if (x_t.rank() != 2 || h_prev.rank() != 2 || x_t.dim(0) != h_prev.dim(0) ||
      x_t.dim(1) != cell.input_width() || h_prev.dim(1) != dh) {
    throw DimensionError("gcrn_step: input " + shape_string(x_t.shape()) + " and state " +
                         shape_string(h_prev.shape()) + " do not fit a cell with widths " +
                         std::to_string(cell.input_width()) + "/" + std::to_string(dh));
  }
  // Both gates convolve the same signal; propagate it once.
  const Tensor mixed = ops::graph_propagate(adj, ops::concat_last_dim(x_t, h_prev));
  const Tensor r = ops::sigmoid(affine(mixed, cell.reset));
  const Tensor u = ops::sigmoid(affine(mixed, cell.update));
  const Tensor c = ops::tanh(graph_conv(adj, ops::concat_last_dim(x_t, ops::mul(r, h_prev)),
                                        cell.candidate));
  return ops::add(ops::mul(u, h_prev), ops::mul(ops::one_minus(u), c));
}

}  // namespace glowcast
