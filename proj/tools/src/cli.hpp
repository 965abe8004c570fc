// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sepdiff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `sepdiff` tool. `args` excludes the program name.
/// Default output root comes from SEPDIFF_OUTPUT_ROOT (else ./sepdiff-out).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sepdiff::cli
