#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace symcere::cli {

/// Exit codes of every subcommand.
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// `args` excludes the program name. The last line written to `out` is a
/// single JSON status record.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace symcere::cli
