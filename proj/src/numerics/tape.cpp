// SPDX-License-Identifier: Apache-2.0
#include "glowcast/numerics/tape.hpp"

#include <cmath>

#include "glowcast/error.hpp"

namespace glowcast {
namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

Tape& Tape::current() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(std::string_view op, Tensor output, std::vector<Tensor> inputs,
                  std::function<void()> backward) {
  entries_.push_back({op, std::move(output), std::move(inputs), std::move(backward)});
}

void Tape::run_backward(Tensor loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward on a loss that does not depend on tracked tensors");
  }
  loss.grad_buffer()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->output.has_grad()) continue;  // not on a path to the loss
    it->backward();
  }
  entries_.clear();
}

std::optional<Tape::NonFinite> Tape::first_non_finite() const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    for (double v : entries_[i].output.values()) {
      if (!std::isfinite(v)) {
        return NonFinite{i, std::string(entries_[i].op), entries_[i].output.shape()};
      }
    }
  }
  return std::nullopt;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) { Tape::current().run_backward(loss); }

}  // namespace glowcast
