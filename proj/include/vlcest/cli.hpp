#pragma once

#include <iosfwd>

namespace vlcest {

/// Entry point of the `vlcest` tool. Subcommands: gen-channels, train, fit-mmse, sweep, compare.
/// Returns 0 on success and nonzero with a diagnostic on stderr otherwise.
int cli_main(int argc, char** argv);
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace vlcest
