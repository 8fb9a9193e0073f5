#pragma once

namespace kappaforge {

// Entry point behind the kappaforge binary; exposed so tests can drive the
// CLI surface in-process. Returns the process exit status.
int run_cli(int argc, const char* const* argv);

} // namespace kappaforge
