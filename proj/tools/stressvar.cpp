#include "stressvar/cli.hpp"
#include "stressvar/errors.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <functional>
#include <iostream>
#include <map>

namespace {

using Command = std::function<std::vector<std::filesystem::path>(const svar::cli::RunConfig&)>;

struct Override {
    std::string key;
    std::string value;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"StressVaR hedge-fund risk engine"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "stressvar 0.1.0");

    const std::map<std::string, std::pair<std::string, Command>> commands{
        {"synth", {"generate a synthetic universe: funds.csv, factors.csv, ground_truth.csv", svar::cli::cmd_synth}},
        {"score", {"score factors for every fund: profiles.json", svar::cli::cmd_score}},
        {"svar", {"StressVaR, GVaR and CFVaR per fund: svar.json, curves.csv", svar::cli::cmd_svar}},
        {"backtest", {"out-of-sample VaR exceptions: exceptions.csv, normalized_returns.csv", svar::cli::cmd_backtest}},
        {"allocate", {"fund-of-funds simulation: fof_returns.csv, performance.csv", svar::cli::cmd_allocate}},
        {"simulate", {"investor Monte Carlo: investor_sims.csv", svar::cli::cmd_simulate}},
        {"config", {"print the resolved configuration", nullptr}},
    };

    std::string config_path;
    std::vector<Override> overrides;
    std::map<std::string, std::string> flag_values;
    std::string chosen;
    for (const auto& [name, entry] : commands) {
        auto* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", config_path, "INI configuration file");
        for (const auto& k : svar::cli::keys()) {
            std::string names = "--" + k.key;
            if (!k.alias.empty()) names += ",--" + k.alias;
            sub->add_option_function<std::string>(
                   names, [&overrides, key = k.key](const std::string& v) { overrides.push_back({key, v}); },
                   fmt::format("{} [{}]", k.doc, k.fallback))
                ->type_name("VALUE");
        }
        sub->callback([&chosen, n = name] { chosen = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        svar::cli::RunConfig cfg;
        if (!config_path.empty()) cfg.load_ini(config_path);
        for (const auto& o : overrides) cfg.set(o.key, o.value);
        const auto& cmd = commands.at(chosen).second;
        if (!cmd) {
            cfg.validate();
            cfg.write_ini(std::cout);
            return 0;
        }
        for (const auto& path : cmd(cfg)) std::cout << path.string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "stressvar: " << e.what() << '\n';
        return svar::cli::exit_code(e);
    }
}
