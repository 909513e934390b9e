// SPDX-License-Identifier: Apache-2.0
#include "glowcast/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glowcast/error.hpp"
#include "glowcast/numerics/kernels.hpp"
#include "glowcast/numerics/tape.hpp"

namespace glowcast::ops {
namespace {

bool tracks(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

Tensor result(Shape shape, std::vector<double> values, bool track) {
  Tensor out = Tensor::from(std::move(shape), std::move(values));
  out.set_requires_grad(track);
  return out;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_string(t.shape()));
  }
}

std::size_t last_extent(const Tensor& t) { return t.shape().back(); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) +
                         " * " + shape_string(b.shape()));
  }
  std::vector<double> out(m * p, 0.0);
  kernels::active().gemm(a.values().data(), b.values().data(), out.data(), m, k, p);
  const bool track = tracks({&a, &b});
  Tensor c = result({m, p}, std::move(out), track);
  if (track) {
    Tape::current().record("matmul", c, {a, b}, [a, b, c, m, k, p] {
      const auto& kt = kernels::active();
      const double* dc = c.grad().data();
      if (a.requires_grad()) kt.gemm_nt(dc, b.values().data(), a.grad_buffer().data(), m, p, k);
      if (b.requires_grad()) kt.gemm_tn(a.values().data(), dc, b.grad_buffer().data(), m, k, p);
    });
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), p = a.dim(1);
  std::vector<double> out(m * p);
  const auto in = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) out[j * m + i] = in[i * p + j];
  const bool track = tracks({&a});
  Tensor t = result({p, m}, std::move(out), track);
  if (track) {
    Tape::current().record("transpose", t, {a}, [a, t, m, p] {
      auto ga = a.grad_buffer();
      const auto gt = t.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += gt[j * m + i];
    });
  }
  return t;
}

Tensor row_softmax(const Tensor& a) {
  const std::size_t p = last_extent(a);
  const std::size_t rows = a.numel() / p;
  const auto in = a.values();
  for (double v : in) {
    if (std::isnan(v)) throw NumericError("row_softmax: NaN input");
    if (!std::isfinite(v)) throw NumericError("row_softmax: infinite input");
  }
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * p;
    double* y = out.data() + r * p;
    const double hi = *std::max_element(x, x + p);
    double total = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      y[j] = std::exp(x[j] - hi);
      total += y[j];
    }
    for (std::size_t j = 0; j < p; ++j) y[j] /= total;
  }
  const bool track = tracks({&a});
  Tensor s = result(a.shape(), std::move(out), track);
  if (track) {
    Tape::current().record("row_softmax", s, {a}, [a, s, rows, p] {
      auto ga = a.grad_buffer();
      const auto gs = s.grad();
      const auto y = s.values();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t off = r * p;
        double inner = 0.0;
        for (std::size_t j = 0; j < p; ++j) inner += y[off + j] * gs[off + j];
        for (std::size_t j = 0; j < p; ++j) ga[off + j] += y[off + j] * (gs[off + j] - inner);
      }
    });
  }
  return s;
}

Tensor elementwise(Unary kind, const Tensor& a) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  const char* name = "relu";
  switch (kind) {
    case Unary::kRelu:
      std::transform(in.begin(), in.end(), out.begin(),
                     [](double x) { return x > 0.0 ? x : 0.0; });
      break;
    case Unary::kSigmoid:
      name = "sigmoid";
      std::transform(in.begin(), in.end(), out.begin(), stable_sigmoid);
      break;
    case Unary::kTanh:
      name = "tanh";
      std::transform(in.begin(), in.end(), out.begin(), [](double x) { return std::tanh(x); });
      break;
    case Unary::kAbs:
      name = "abs";
      std::transform(in.begin(), in.end(), out.begin(), [](double x) { return std::fabs(x); });
      break;
  }
  const bool track = tracks({&a});
  Tensor y = result(a.shape(), std::move(out), track);
  if (track) {
    Tape::current().record(name, y, {a}, [a, y, kind] {
      auto ga = a.grad_buffer();
      const auto gy = y.grad();
      const auto x = a.values();
      const auto v = y.values();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        double d = 0.0;
        switch (kind) {
          case Unary::kRelu: d = x[i] > 0.0 ? 1.0 : 0.0; break;
          case Unary::kSigmoid: d = v[i] * (1.0 - v[i]); break;
          case Unary::kTanh: d = 1.0 - v[i] * v[i]; break;
          case Unary::kAbs: d = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0); break;
        }
        ga[i] += d * gy[i];
      }
    });
  }
  return y;
}

Tensor elementwise(Binary kind, const Tensor& a, const Tensor& b) {
  const char* name = kind == Binary::kAdd ? "add" : (kind == Binary::kSub ? "sub" : "mul");
  const bool same = a.shape() == b.shape();
  const bool a_scalar = !same && a.numel() == 1;
  const bool b_scalar = !same && b.numel() == 1;
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError(std::string(name) + ": shapes differ, " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
  const Shape shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  const auto& kt = kernels::active();
  if (same) {
    const double* x = a.values().data();
    const double* y = b.values().data();
    switch (kind) {
      case Binary::kAdd: kt.add(x, y, out.data(), n); break;
      case Binary::kSub: kt.sub(x, y, out.data(), n); break;
      case Binary::kMul: kt.mul(x, y, out.data(), n); break;
    }
  } else {
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < n; ++i) {
      const double x = a_scalar ? av[0] : av[i];
      const double y = b_scalar ? bv[0] : bv[i];
      out[i] = kind == Binary::kAdd ? x + y : (kind == Binary::kSub ? x - y : x * y);
    }
  }
  const bool track = tracks({&a, &b});
  Tensor c = result(shape, std::move(out), track);
  if (track) {
    Tape::current().record(name, c, {a, b}, [a, b, c, kind, a_scalar, b_scalar, n] {
      const auto gc = c.grad();
      const auto av = a.values();
      const auto bv = b.values();
      auto push = [n, &gc](const Tensor& target, bool collapsed, auto&& factor) {
        auto g = target.grad_buffer();
        if (collapsed) {
          double acc = 0.0;
          for (std::size_t i = 0; i < n; ++i) acc += gc[i] * factor(i);
          g[0] += acc;
        } else {
          for (std::size_t i = 0; i < n; ++i) g[i] += gc[i] * factor(i);
        }
      };
      const double sign_b = kind == Binary::kSub ? -1.0 : 1.0;
      if (a.requires_grad()) {
        if (kind == Binary::kMul) {
          push(a, a_scalar, [&](std::size_t i) { return b_scalar ? bv[0] : bv[i]; });
        } else {
          push(a, a_scalar, [](std::size_t) { return 1.0; });
        }
      }
      if (b.requires_grad()) {
        if (kind == Binary::kMul) {
          push(b, b_scalar, [&](std::size_t i) { return a_scalar ? av[0] : av[i]; });
        } else {
          push(b, b_scalar, [sign_b](std::size_t) { return sign_b; });
        }
      }
    });
  }
  return c;
}

Tensor scale(const Tensor& a, double factor) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * factor;
  const bool track = tracks({&a});
  Tensor y = result(a.shape(), std::move(out), track);
  if (track) {
    Tape::current().record("scale", y, {a}, [a, y, factor] {
      kernels::active().axpy(factor, y.grad().data(), a.grad_buffer().data(), a.numel());
    });
  }
  return y;
}

Tensor add_scalar(const Tensor& a, double offset) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + offset;
  const bool track = tracks({&a});
  Tensor y = result(a.shape(), std::move(out), track);
  if (track) {
    Tape::current().record("add_scalar", y, {a}, [a, y] {
      kernels::active().axpy(1.0, y.grad().data(), a.grad_buffer().data(), a.numel());
    });
  }
  return y;
}

Tensor one_minus(const Tensor& a) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = 1.0 - in[i];
  const bool track = tracks({&a});
  Tensor y = result(a.shape(), std::move(out), track);
  if (track) {
    Tape::current().record("one_minus", y, {a}, [a, y] {
      kernels::active().axpy(-1.0, y.grad().data(), a.grad_buffer().data(), a.numel());
    });
  }
  return y;
}

Tensor concat_last_dim(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size() || !std::equal(sa.begin(), sa.end() - 1, sb.begin())) {
    throw DimensionError("concat_last_dim: leading extents differ, " + shape_string(sa) +
                         " vs " + shape_string(sb));
  }
  const std::size_t p = sa.back(), q = sb.back(), rows = a.numel() / p;
  std::vector<double> out(rows * (p + q));
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * p, p, out.data() + r * (p + q));
    std::copy_n(bv.data() + r * q, q, out.data() + r * (p + q) + p);
  }
  Shape shape = sa;
  shape.back() = p + q;
  const bool track = tracks({&a, &b});
  Tensor c = result(std::move(shape), std::move(out), track);
  if (track) {
    Tape::current().record("concat_last_dim", c, {a, b}, [a, b, c, rows, p, q] {
      const auto gc = c.grad();
      const auto& kt = kernels::active();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          kt.axpy(1.0, gc.data() + r * (p + q), ga.data() + r * p, p);
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          kt.axpy(1.0, gc.data() + r * (p + q) + p, gb.data() + r * q, q);
      }
    });
  }
  return c;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t p = last_extent(x);
  if (bias.rank() != 1 || bias.dim(0) != p) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) +
                         " does not match last axis of " + shape_string(x.shape()));
  }
  const std::size_t rows = x.numel() / p;
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto& kt = kernels::active();
  for (std::size_t r = 0; r < rows; ++r) kt.add(out.data() + r * p, bias.values().data(), out.data() + r * p, p);
  const bool track = tracks({&x, &bias});
  Tensor y = result(x.shape(), std::move(out), track);
  if (track) {
    Tape::current().record("add_bias", y, {x, bias}, [x, bias, y, rows, p] {
      const auto gy = y.grad();
      const auto& kt = kernels::active();
      if (x.requires_grad()) kt.axpy(1.0, gy.data(), x.grad_buffer().data(), x.numel());
      if (bias.requires_grad()) {
        auto gb = bias.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) kt.axpy(1.0, gy.data() + r * p, gb.data(), p);
      }
    });
  }
  return y;
}

Tensor graph_propagate(const Tensor& adj, const Tensor& h) {
  require_rank(adj, 2, "graph_propagate");
  require_rank(h, 2, "graph_propagate");
  const std::size_t n = adj.dim(0);
  if (adj.dim(1) != n || h.dim(0) % n != 0) {
    throw DimensionError("graph_propagate: adjacency " + shape_string(adj.shape()) +
                         " incompatible with signal " + shape_string(h.shape()));
  }
  const std::size_t blocks = h.dim(0) / n, d = h.dim(1);
  std::vector<double> out(h.numel(), 0.0);
  const auto& kt = kernels::active();
  for (std::size_t b = 0; b < blocks; ++b) {
    kt.gemm(adj.values().data(), h.values().data() + b * n * d, out.data() + b * n * d, n, n, d);
  }
  const bool track = tracks({&adj, &h});
  Tensor y = result(h.shape(), std::move(out), track);
  if (track) {
    Tape::current().record("graph_propagate", y, {adj, h}, [adj, h, y, n, d, blocks] {
      const auto& kt = kernels::active();
      const double* gy = y.grad().data();
      for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t off = b * n * d;
        if (adj.requires_grad())
          kt.gemm_nt(gy + off, h.values().data() + off, adj.grad_buffer().data(), n, d, n);
        if (h.requires_grad())
          kt.gemm_tn(adj.values().data(), gy + off, h.grad_buffer().data() + off, n, n, d);
      }
    });
  }
  return y;
}

Tensor sum(const Tensor& a) {
  const auto in = a.values();
  const double total = std::accumulate(in.begin(), in.end(), 0.0);
  const bool track = tracks({&a});
  Tensor s = result({1}, {total}, track);
  if (track) {
    Tape::current().record("sum", s, {a}, [a, s] {
      const double g = s.grad()[0];
      for (double& v : a.grad_buffer()) v += g;
    });
  }
  return s;
}

Tensor mean(const Tensor& a) {
  const auto in = a.values();
  const double n = static_cast<double>(in.size());
  const double avg = std::accumulate(in.begin(), in.end(), 0.0) / n;
  const bool track = tracks({&a});
  Tensor s = result({1}, {avg}, track);
  if (track) {
    Tape::current().record("mean", s, {a}, [a, s, n] {
      const double g = s.grad()[0] / n;
      for (double& v : a.grad_buffer()) v += g;
    });
  }
  return s;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " cannot become " +
                         shape_string(shape));
  }
  const bool track = tracks({&a});
  Tensor y = result(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()), track);
  if (track) {
    Tape::current().record("reshape", y, {a}, [a, y] {
      kernels::active().axpy(1.0, y.grad().data(), a.grad_buffer().data(), a.numel());
    });
  }
  return y;
}

Tensor swap_leading_axes(const Tensor& a) {
  require_rank(a, 3, "swap_leading_axes");
  const std::size_t d0 = a.dim(0), d1 = a.dim(1), d2 = a.dim(2);
  std::vector<double> out(a.numel());
  const auto in = a.values();
  for (std::size_t i = 0; i < d0; ++i)
    for (std::size_t j = 0; j < d1; ++j)
      std::copy_n(in.data() + (i * d1 + j) * d2, d2, out.data() + (j * d0 + i) * d2);
  const bool track = tracks({&a});
  Tensor y = result({d1, d0, d2}, std::move(out), track);
  if (track) {
    Tape::current().record("swap_leading_axes", y, {a}, [a, y, d0, d1, d2] {
      auto ga = a.grad_buffer();
      const auto gy = y.grad();
      const auto& kt = kernels::active();
      for (std::size_t i = 0; i < d0; ++i)
        for (std::size_t j = 0; j < d1; ++j)
          kt.axpy(1.0, gy.data() + (j * d0 + i) * d2, ga.data() + (i * d1 + j) * d2, d2);
    });
  }
  return y;
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("stack: no tensors given");
  const Shape& inner = parts.front().shape();
  for (const Tensor& t : parts) {
    if (t.shape() != inner) {
      throw DimensionError("stack: shapes differ, " + shape_string(inner) + " vs " +
                           shape_string(t.shape()));
    }
  }
  const std::size_t block = parts.front().numel();
  std::vector<double> out;
  out.reserve(block * parts.size());
  bool track = false;
  for (const Tensor& t : parts) {
    out.insert(out.end(), t.values().begin(), t.values().end());
    track = track || (grad_enabled() && t.requires_grad());
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor y = result(std::move(shape), std::move(out), track);
  if (track) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    Tape::current().record("stack", y, inputs, [inputs, y, block] {
      const auto gy = y.grad();
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].requires_grad()) continue;
        kernels::active().axpy(1.0, gy.data() + i * block, inputs[i].grad_buffer().data(), block);
      }
    });
  }
  return y;
}

Tensor mae_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("mae_loss: prediction " + shape_string(pred.shape()) +
                         " vs target " + shape_string(target.shape()));
  }
  return mean(abs(sub(pred, target)));
}

}  // namespace glowcast::ops
