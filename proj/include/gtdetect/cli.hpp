#pragma once

namespace gtdetect::cli {

// Full command-line surface. Returns the process exit code:
// 0 success, 1 usage error, 2 data error, 3 numeric failure.
int run_cli(int argc, const char* const* argv);

}  // namespace gtdetect::cli
