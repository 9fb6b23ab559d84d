#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vhs/commands.h"
#include "vhs/errors.h"

namespace {

struct Key {
    const char* name;
    const char* help;
};

const std::map<std::string, std::vector<Key>>& command_keys() {
    static const std::map<std::string, std::vector<Key>> keys{
        {"var",
         {{"prices", "price CSV (date column then one column per asset)"},
          {"output", "output directory"},
          {"method", "vhs | naive-garch (default vhs)"},
          {"alpha", "VaR level in (0, 0.5) (default 0.05)"},
          {"alpha0", "CI error rate; the interval has level 1 - alpha0 (default 0.10)"},
          {"policy", "static:W | crystallized:U | rebalance:T:W | minvar[:L] | alternate:T (default static:equal)"},
          {"window", "expanding | rolling:L (default expanding)"},
          {"t0", "last | a date of the panel | a return index (default last)"},
          {"psi", "kernel | indicator (default kernel)"},
          {"iid", "use the iid simplification of the covariance (default false)"},
          {"demean", "remove the sample mean before fitting (default false)"},
          {"min_window", "minimum number of returns (default 250)"},
          {"hac_bandwidth", "Bartlett bandwidth (default floor(1.1447 n^(1/3)))"}}},
        {"backtest",
         {{"prices", "price CSV"},
          {"output", "output directory"},
          {"policy", "holdings policy (default static:equal)"},
          {"methods", "comma list of naive-garch, naive-empirical, vhs, spherical, fhs (default naive-garch,vhs)"},
          {"alpha", "VaR level (default 0.05)"},
          {"window", "expanding | rolling:L (default rolling:500)"},
          {"min_window", "minimum estimation sample (default: rolling length, or 250)"},
          {"start", "first return index forecast (default min_window)"},
          {"end", "one past the last return index forecast (default: all)"},
          {"reference", "auto | none | a method for the DM column (auto = naive-garch when present)"},
          {"episode", "label written in the episode column"}}},
        {"simulate",
         {{"output", "output directory"},
          {"design", "A..H (cDCC presets) or factor"},
          {"n", "number of returns (default 1000)"},
          {"seed", "RNG seed (default 1)"},
          {"burn_in", "discarded warm-up draws, at least 500 (default 500)"},
          {"m", "assets for the factor model (default 2)"},
          {"price_scale", "log-price increment per unit of simulated return (default 0.01)"},
          {"base_price", "price on the first date (default 100)"},
          {"start_date", "first date (default 2000-01-03)"}}},
        {"experiment",
         {{"output", "output directory"},
          {"table", "1 (relative efficiency), 2 (factor backtest) or static"},
          {"scale", "desk | full (default desk)"},
          {"designs", "designs for table 1 (default A,B,C,D,E,F,G,H)"},
          {"design", "a single design for table 1"},
          {"seed", "base seed (default 1)"},
          {"workers", "worker threads (default: available cores)"},
          {"alphas", "levels for table 1 (default 0.01,0.05)"},
          {"traces", "also write per-prediction traces (default false)"},
          {"n1", "estimation sample for table 1 (default 500)"},
          {"predictions", "out-of-sample predictions for table 1"},
          {"replications", "replications for table 1"},
          {"m", "assets for table 2 (default 2)"},
          {"horizon", "forecasts per seed for table 2 (default 400)"},
          {"window", "rolling window for table 2 (default 1000)"},
          {"switch_period", "composition switch period for table 2 (default 100)"},
          {"seeds", "number of seeds for table 2 (default 1)"},
          {"alpha", "VaR level for table 2 and static (default 0.05)"},
          {"methods", "methods for table 2 (default naive-garch,vhs,spherical,fhs)"},
          {"n", "returns for the static experiment (default 5000)"}}},
    };
    return keys;
}

std::string flag_name(std::string key) {
    for (auto& c : key)
        if (c == '_') c = '-';
    return "--" + key;
}

std::string command_help(const std::string& cmd) {
    if (cmd == "var") return "one-step VaR of a portfolio with its confidence interval";
    if (cmd == "backtest") return "rolling out-of-sample VaR and coverage/loss statistics";
    if (cmd == "simulate") return "simulate a price panel from a preset design";
    return "Monte Carlo tables (relative efficiency, factor backtest, static portfolio)";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional VaR of dynamic portfolios by virtual historical simulation"};
    app.require_subcommand(1);
    app.footer(vhs::cli::exit_code_help() +
               "\nEvery setting can also come from a key=value file given with --config; flags override the file.");

    std::map<std::string, std::map<std::string, std::string>> flag_values;
    std::map<std::string, std::string> config_paths;
    for (const auto& [cmd, keys] : command_keys()) {
        auto* sub = app.add_subcommand(cmd, command_help(cmd));
        sub->add_option("--config", config_paths[cmd], "key=value config file");
        for (const auto& k : keys) sub->add_option(flag_name(k.name), flag_values[cmd][k.name], k.help);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return vhs::cli::kExitValidation;
    }

    for (const auto& [cmd, keys] : command_keys()) {
        auto* sub = app.get_subcommand(cmd);
        if (!sub->parsed()) continue;
        try {
            vhs::RunConfig cfg = config_paths[cmd].empty() ? vhs::RunConfig(cmd) : vhs::RunConfig::load(config_paths[cmd], cmd);
            cfg.set_command(cmd);
            for (const auto& k : keys)
                if (sub->count(flag_name(k.name)) > 0) cfg.set_flag(k.name, flag_values[cmd][k.name]);
            return vhs::cli::run(cfg, std::cout, std::cerr);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return vhs::cli::exit_code(e);
        }
    }
    return vhs::cli::kExitValidation;
}
