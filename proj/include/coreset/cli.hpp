#pragma once

namespace coreset::cli {

// Parses argv and runs one subcommand. Returns 0 on success, 1 on a usage
// error, 2 on a data error.
int run(int argc, char** argv);

}  // namespace coreset::cli
