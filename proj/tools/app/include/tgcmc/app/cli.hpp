#ifndef TGCMC_APP_CLI_HPP_
#define TGCMC_APP_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace tgcmc::app {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime error or incomplete artifact
inline constexpr int kExitUsage = 2;    // bad flags or config

// Entry point of the `tgcmc` tool; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tgcmc::app

#endif  // TGCMC_APP_CLI_HPP_
