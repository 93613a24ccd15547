#pragma once

// Run configuration and pipeline commands behind the `stressvar` tool.
//
// Configuration is an INI file of `key = value` lines under [section]
// headers; every key is addressed as section.key, has a default, and can be
// overridden by a --section.key flag. Unknown keys are rejected.

#include "stressvar/alloc.hpp"
#include "stressvar/backtest.hpp"
#include "stressvar/scoring.hpp"
#include "stressvar/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace svar::cli {

inline constexpr int kSchemaVersion = 1;

struct KeyInfo {
    std::string key;       // section.key
    std::string fallback;  // default value as text
    std::string doc;
    std::string alias;     // short flag name, may be empty
    bool hashed = true;    // part of config_hash
};

// All documented keys, in documentation order.
const std::vector<KeyInfo>& keys();

class RunConfig {
public:
    RunConfig();

    // ConfigError naming the key when it is unknown or the value malformed.
    void set(std::string_view key, std::string value);
    const std::string& get(std::string_view key) const;
    void load_ini(const std::string& path);
    void load_ini(std::istream& in);

    std::string text(std::string_view key) const { return get(key); }
    double number(std::string_view key) const;
    std::int64_t integer(std::string_view key) const;
    std::size_t count(std::string_view key) const;
    bool flag(std::string_view key) const;
    std::optional<timeseries::Month> month(std::string_view key) const;
    std::vector<std::string> list(std::string_view key) const;

    std::uint64_t seed() const;
    std::size_t workers() const;
    std::filesystem::path out_dir() const;
    std::filesystem::path input(std::string_view key) const;

    // FNV-1a over the sorted key=value lines of the hashed keys, as 16 hex digits.
    std::string hash() const;
    // "stressvar <command> schema_version=1 config_hash=... seed=..."
    std::string header(std::string_view command) const;
    // Resolved configuration as an INI document.
    void write_ini(std::ostream& out) const;

    synth::SynthSpec synth_spec() const;
    scoring::ScoringConfig scoring_config() const;
    backtest::EstimatorConfig estimator_config() const;
    backtest::BacktestConfig backtest_config(risk::Measure m) const;
    alloc::AllocationConfig alloc_config(risk::Measure m) const;
    alloc::InvestorConfig investor_config() const;

    // Validates every module config and the kernel backend.
    void validate() const;

private:
    std::map<std::string, std::string, std::less<>> values_;
};

struct Inputs {
    timeseries::FundUniverse funds;  // stop-loss already applied
    timeseries::FactorPanel panel;
};

Inputs load_inputs(const RunConfig& cfg);

// Each command writes into cfg.out_dir() and returns the paths it wrote.
std::vector<std::filesystem::path> cmd_synth(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_score(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_svar(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_backtest(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_allocate(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_simulate(const RunConfig& cfg);

// Exit codes: 0 success, 1 usage or configuration, 2 data or I/O.
int exit_code(const std::exception& e);

}  // namespace svar::cli
