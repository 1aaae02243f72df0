#ifndef MHAS_CLI_HPP_
#define MHAS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace mhas::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2 };

/// Runs one subcommand. argv[0] is the program name. Errors are reported as a
/// single "mhas: error: <kind>: <message>" line on `err`.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace mhas::cli

#endif  // MHAS_CLI_HPP_
