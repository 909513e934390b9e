// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace glowcast {

/// Exit codes beyond 0 (success): CLI11's own codes for usage errors,
/// kExitFailure for bad input or configuration, kExitNumeric when training
/// diverges.
inline constexpr int kExitFailure = 1;
inline constexpr int kExitNumeric = 2;

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// New directory `<root>/<YYYYmmdd-HHMMSS>_seed<seed>` (suffixed -2, -3, ...
/// if taken) where root is $GLOWCAST_RUN_DIR or "runs".
std::filesystem::path create_run_dir(unsigned long long seed);

}  // namespace glowcast
