#pragma once

namespace articnav::cli {

// Entry point of the artic-nav tool. Returns 0 on success, 1 for runtime
// errors and 2 for usage errors. Errors are reported on stderr as one
// "category: message" line.
int run(int argc, const char* const* argv);

}  // namespace articnav::cli
