// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "glowcast/numerics/tensor.hpp"

namespace glowcast {

/// One recorded primitive. `backward` reads output.grad() and accumulates
/// into the inputs that require a gradient.
struct TapeEntry {
  std::string_view op;
  Tensor output;
  std::vector<Tensor> inputs;
  std::function<void()> backward;
};

/// Reverse-mode record of the primitives executed since the last backward
/// pass. One tape per thread.
class Tape {
 public:
  static Tape& current();

  void record(std::string_view op, Tensor output, std::vector<Tensor> inputs,
              std::function<void()> backward);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<TapeEntry>& entries() const { return entries_; }

  /// Replays adjoints in reverse recording order, then clears the tape.
  void run_backward(Tensor loss);

  struct NonFinite {
    std::size_t position;
    std::string op;
    Shape shape;
  };
  /// First recorded op (in execution order) whose output has a NaN/Inf.
  std::optional<NonFinite> first_non_finite() const;

 private:
  std::vector<TapeEntry> entries_;
};

bool grad_enabled();

/// Disables tape recording for its lifetime (evaluation, finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Populates grad on every tracked tensor reachable from a scalar loss and
/// clears the tape. Gradients accumulate across calls; zero them between
/// optimizer steps.
void backward(const Tensor& loss);

}  // namespace glowcast
