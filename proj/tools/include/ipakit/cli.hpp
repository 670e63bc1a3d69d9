#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ipakit::cli {

// Seed used when --seed is not given.
inline constexpr std::uint64_t kDefaultSeed = 20250611;

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kDataError = 2 };

/// Runs one subcommand. `args` excludes the program name. "-" or an absent
/// --input/--output means the given streams.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace ipakit::cli
