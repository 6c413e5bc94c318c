#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rfbarrier::cli {

inline constexpr const char* artifact_version = "1.0.0";

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_config = 2,
    exit_input = 3,
    exit_training = 4,
};

// `args` excludes the program name. Tables and summaries go to `out`,
// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

} // namespace rfbarrier::cli
