#pragma once

#include <string>
#include <vector>

namespace saldist::cli {

/// Runs one CLI invocation; args exclude the program name. Returns 0 on
/// success, 1 on a validation/input error, 2 on an internal failure.
int run(std::vector<std::string> args);

}  // namespace saldist::cli
