#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vhs/config.h"
#include "vhs/portfolio.h"

namespace vhs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitUnsupported = 4;

int exit_code(const std::exception& e);
std::string exit_code_help();

struct CommandResult {
    std::vector<std::filesystem::path> files;  // everything written, in order
    std::string summary;                       // human-readable block
};

// Each command validates its whole config before touching any data and
// writes only below the `output` directory.
CommandResult cmd_var(const RunConfig& cfg);
CommandResult cmd_backtest(const RunConfig& cfg);
CommandResult cmd_simulate(const RunConfig& cfg);
CommandResult cmd_experiment(const RunConfig& cfg);

// Dispatches on cfg.command(), prints the summary or the error and returns
// the process exit status.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// "static:equal", "static:0.3,0.7", "crystallized:equal", "crystallized:1,2",
// "rebalance:20:equal", "minvar:20", "alternate:100" (even/odd assets).
HoldingsPolicy parse_policy(const std::string& spec, const PriceMatrix& prices);
// Syntax check without prices; returns an empty string when the spec is fine.
std::string check_policy_syntax(const std::string& spec);

}  // namespace vhs::cli
