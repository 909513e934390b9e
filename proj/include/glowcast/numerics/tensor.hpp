// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace glowcast {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// A Tensor is a handle: copies share storage, the way autograd frameworks
/// pass activations around. Values are fixed once an op has produced them;
/// only leaves (parameters) are updated in place, by the optimizer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  /// Leaf with requires_grad set.
  static Tensor parameter(Shape shape, std::vector<double> values,
                          std::string name = {});

  bool defined() const { return static_cast<bool>(storage_); }
  bool same_as(const Tensor& other) const { return storage_ == other.storage_; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  /// Element of a rank-2 tensor.
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  /// Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  /// Allocates a zero buffer on first use.
  std::span<double> grad_buffer() const;
  void zero_grad();

  const std::string& name() const;
  void set_name(std::string name);

  /// Deep copy of the values as a fresh leaf without gradient tracking.
  Tensor detach() const;

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    std::string name;
  };

  explicit Tensor(std::shared_ptr<Storage> storage)
      : storage_(std::move(storage)) {}
  Storage& storage() const;

  std::shared_ptr<Storage> storage_;
};

}  // namespace glowcast
