#pragma once

#include <iosfwd>

namespace srfilter {

// srfilter <subcommand> --config <path> [--set key=value ...] --out <dir>
// Returns 0 on success, 1 on a stage error, 2 on a configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace srfilter
