#pragma once

#include <string>
#include <vector>

namespace cwt {

// Exit codes: 0 success, 1 argument/config error, 2 runtime failure,
// 3 verification failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace cwt
