#pragma once

#include <iosfwd>

namespace wfdiff {

/// Entry point of the `wfdiff` tool. Returns 0 on success, 1 for usage or
/// configuration errors and 2 for numerical failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wfdiff
