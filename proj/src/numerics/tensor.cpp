// SPDX-License-Identifier: Apache-2.0
#include "glowcast/numerics/tensor.hpp"

#include <algorithm>

#include "glowcast/error.hpp"

namespace glowcast {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
    }
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  validate_shape(shape);
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  validate_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("shape " + shape_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto storage = std::make_shared<Storage>();
  storage->shape = std::move(shape);
  storage->values = std::move(values);
  return Tensor(std::move(storage));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values, std::string name) {
  Tensor t = from(std::move(shape), std::move(values));
  t.storage_->requires_grad = true;
  t.storage_->name = std::move(name);
  return t;
}

Tensor::Storage& Tensor::storage() const {
  if (!storage_) throw ContractError("use of an undefined tensor");
  return *storage_;
}

const Shape& Tensor::shape() const { return storage().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return storage().values.size(); }

std::span<const double> Tensor::values() const { return storage().values; }
std::span<double> Tensor::mutable_values() { return storage().values; }

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() on a tensor of shape " + shape_string(shape()));
  }
  return storage().values[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const Shape& s = shape();
  if (s.size() != 2 || row >= s[0] || col >= s[1]) {
    throw DimensionError("index (" + std::to_string(row) + "," + std::to_string(col) +
                         ") invalid for " + shape_string(s));
  }
  return storage().values[row * s[1] + col];
}

bool Tensor::requires_grad() const { return storage().requires_grad; }
void Tensor::set_requires_grad(bool flag) { storage().requires_grad = flag; }

bool Tensor::has_grad() const { return !storage().grad.empty(); }
std::span<const double> Tensor::grad() const { return storage().grad; }

std::span<double> Tensor::grad_buffer() const {
  Storage& s = storage();
  if (s.grad.empty()) s.grad.assign(s.values.size(), 0.0);
  return s.grad;
}

void Tensor::zero_grad() {
  Storage& s = storage();
  std::fill(s.grad.begin(), s.grad.end(), 0.0);
}

const std::string& Tensor::name() const { return storage().name; }
void Tensor::set_name(std::string name) { storage().name = std::move(name); }

Tensor Tensor::detach() const {
  const Storage& s = storage();
  return from(s.shape, s.values);
}

}  // namespace glowcast
