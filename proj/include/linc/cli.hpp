#pragma once

#include <iosfwd>

namespace linc {

/// Exit codes: 0 success, 1 configuration or input error, 2 backend error,
/// 3 training divergence.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace linc
