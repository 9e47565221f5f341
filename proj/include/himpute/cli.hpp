#pragma once

namespace himpute {

// Full command-line front end (impute / analyze / simulate / pool). Returns
// the process exit code: 0 success, 1 runtime failure, 2 usage or config
// error. Errors go to stderr; data goes to files.
int run_cli(int argc, const char* const* argv);

}  // namespace himpute
