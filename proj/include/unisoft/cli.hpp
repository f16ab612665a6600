#pragma once

#include <string>
#include <vector>

namespace unisoft {

/// Runs one CLI invocation. Exit codes: 0 success, 2 validation error
/// (message names the offending field), 3 I/O error.
int run_cli(const std::vector<std::string>& args);

}  // namespace unisoft
