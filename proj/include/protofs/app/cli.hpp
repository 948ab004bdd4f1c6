#pragma once

namespace protofs::app {

/// Entry point of the protofs command line. Returns 0 on success, 1 on a
/// validation or runtime error and 2 on a usage error.
int run_cli(int argc, const char* const* argv);

} // namespace protofs::app
