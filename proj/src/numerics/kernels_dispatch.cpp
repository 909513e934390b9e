// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string>

#include "glowcast/error.hpp"
#include "glowcast/numerics/kernels.hpp"

namespace glowcast::kernels {
namespace {

Isa detect() {
  const char* env = std::getenv("GLOWCAST_SIMD");
  if (env != nullptr && std::string(env) == "scalar") return Isa::kScalar;
  if (cpu_supports(Isa::kAvx2)) return Isa::kAvx2;
  return Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& active() {
  return current().load(std::memory_order_relaxed) == Isa::kAvx2 ? *avx2_table()
                                                                 : scalar_table();
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

void force_isa(Isa isa) {
  if (!cpu_supports(isa)) {
    throw ContractError("instruction set '" + std::string(isa_name(isa)) +
                        "' is not available on this CPU");
  }
  current().store(isa, std::memory_order_relaxed);
}

}  // namespace glowcast::kernels
