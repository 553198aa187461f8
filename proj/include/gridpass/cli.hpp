#pragma once

#include <iosfwd>

namespace gridpass {

/// Entry point behind the gridpass executable. Returns 0 on success, 1 for
/// configuration errors and bad usage, 2 for numerical failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gridpass
