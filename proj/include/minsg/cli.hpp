#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace minsg {

/// Exit codes: 0 success, 1 validation failure, 2 numerical failure,
/// 3 consistency failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace minsg
