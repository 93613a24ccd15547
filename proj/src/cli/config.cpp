#include "stressvar/cli.hpp"

#include "stressvar/errors.hpp"
#include "stressvar/kernels.hpp"
#include "stressvar/seed.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace svar::cli {

namespace {

template <class T>
std::string show(T v) {
    return fmt::format("{}", v);
}

std::vector<KeyInfo> build_keys() {
    const synth::SynthSpec sy;
    const scoring::ScoringConfig sc;
    const backtest::EstimatorConfig est;
    const backtest::BacktestConfig bt;
    const alloc::AllocationConfig al;
    const alloc::InvestorConfig inv;
    return {
        {"data.funds", "funds.csv", "fund returns, CSV with header date,id,return", "funds"},
        {"data.factors", "factors.csv", "factor returns, same CSV layout", "factors"},
        {"data.out", "out", "output directory", "out", false},
        {"data.stop_loss", "0.3", "loss booked in the month after a fund stops reporting", ""},
        {"run.seed", "1", "master seed; all random streams derive from it", "seed"},
        {"run.workers", "1", "worker threads, 0 = hardware concurrency", "workers", false},
        {"run.kernels", "auto", "numeric kernels: auto, scalar or avx2", "kernels"},
        {"model.window", show(est.window), "calibration window in months", "window"},
        {"model.ar_max", show(sc.ar_max), "largest autoregressive order", ""},
        {"model.lags_max", show(sc.lags_max), "largest factor lag", ""},
        {"model.degree_max", show(sc.degree_max), "largest polynomial degree", ""},
        {"model.criterion", "bic", "model selection criterion: bic or aic", ""},
        {"model.ridge_scale", show(sc.select.fit.ridge_scale), "ridge penalty relative to the mean Gram diagonal", ""},
        {"model.max_selected", show(sc.max_selected), "factors kept in a risk profile", ""},
        {"model.gamma", show(sc.threshold.gamma), "adaptive threshold multiplier on the smallest p-value", ""},
        {"model.threshold_floor", show(sc.threshold.floor), "lower clamp of the selection threshold", ""},
        {"model.threshold_ceiling", show(sc.threshold.ceiling), "upper clamp of the selection threshold", ""},
        {"model.q", show(est.q), "StressVaR coverage on the 0.01 lattice in [0.90, 0.99]", "q"},
        {"model.z", show(est.z), "Gaussian quantile for GVaR and CFVaR", ""},
        {"model.lag_shock", "sustained", "lagged factor terms in the scan: sustained or zero", ""},
        {"model.factor_min_history", show(est.factor_min_history), "months of factor history needed for a quantile curve", ""},
        {"model.as_of", "", "score/svar: use only data strictly before this date; empty = all data", "as-of"},
        {"backtest.measures", "gvar,cfvar,svar", "measures to backtest", ""},
        {"backtest.start", "", "first evaluated month; empty = earliest", ""},
        {"backtest.end", "", "last evaluated month; empty = latest", ""},
        {"backtest.recalibrate_months", show(bt.recalibrate_months), "months between StressVaR recalibrations", ""},
        {"alloc.measures", "svar,gvar,cfvar,random", "allocation measures to simulate", ""},
        {"alloc.select_fraction", show(al.select_fraction), "fraction of the least risky funds selected", ""},
        {"alloc.weight_cap", show(al.weight_cap), "largest weight of one fund", ""},
        {"alloc.leverage_cap", show(al.leverage_cap), "largest leverage", ""},
        {"alloc.rebalance_months", show(al.rebalance_months), "months between rebalances", ""},
        {"alloc.risk_free", show(al.risk_free_annual), "annual risk-free rate", ""},
        {"alloc.start", "", "first rebalance; empty = first month with a full window", ""},
        {"alloc.end", "", "last month held; empty = latest", ""},
        {"simulate.measure", "svar", "measure of the simulated investors", ""},
        {"simulate.n_sims", show(inv.n_sims), "number of simulated investors", ""},
        {"simulate.sub_n", show(inv.sub_n), "funds drawn per investor", ""},
        {"simulate.pick_n", show(inv.pick_n), "funds held per investor", ""},
        {"synth.n_factors", show(sy.n_factors), "factors generated", ""},
        {"synth.n_funds", show(sy.n_funds), "funds generated", ""},
        {"synth.factor_months", show(sy.factor_months), "months of factor history", ""},
        {"synth.fund_months", show(sy.fund_months), "months of fund history (the last ones)", ""},
        {"synth.payoff", synth::payoff_name(sy.payoff), "linear, short_put, quadratic or mixed", ""},
        {"synth.noise_share", show(sy.noise_share), "share of fund variance from idiosyncratic noise", ""},
        {"synth.smoothing", show(sy.smoothing), "MA(1) coefficient applied to fund returns", ""},
        {"synth.tail_df", show(sy.tail_df), "Student-t degrees of freedom of factor innovations", ""},
        {"synth.end", sy.end.to_string(), "last month generated", ""},
        {"synth.factor_vol", show(sy.factor_vol), "monthly factor volatility", ""},
        {"synth.factor_drift", show(sy.factor_drift), "monthly factor drift", ""},
        {"synth.corr_pairs", show(sy.corr_pairs), "correlated factor pairs", ""},
        {"synth.corr", show(sy.corr), "correlation inside a pair", ""},
        {"synth.crash_factors", show(sy.crash_factors), "factors with a crash before fund inception", ""},
        {"synth.crash_depth", show(sy.crash_depth), "largest monthly crash loss", ""},
        {"synth.crash_months", show(sy.crash_months), "length of a crash episode", ""},
        {"synth.crisis", sy.final_year_crash ? "true" : "false", "crash one factor in the final year", ""},
        {"synth.crisis_share", show(sy.crisis_share), "share of funds short a put on the crisis factor", ""},
        {"synth.death_drawdown", show(sy.death_drawdown), "drawdown after which a fund stops reporting, 0 = never", ""},
    };
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<KeyInfo>& keys() {
    static const std::vector<KeyInfo> k = build_keys();
    return k;
}

RunConfig::RunConfig() {
    for (const auto& k : keys()) values_.emplace(k.key, k.fallback);
}

void RunConfig::set(std::string_view key, std::string value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(fmt::format("unknown configuration key '{}'", key));
    it->second = trim(std::move(value));
}

const std::string& RunConfig::get(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(fmt::format("unknown configuration key '{}'", key));
    return it->second;
}

void RunConfig::load_ini(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError(fmt::format("unknown configuration key '{}' outside a section", section));
        for (const auto& [key, value] : body) set(section + "." + key, value.get_value<std::string>());
    }
}

void RunConfig::load_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    load_ini(in);
}

double RunConfig::number(std::string_view key) const {
    const auto& s = get(key);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        throw ConfigError(fmt::format("{}: '{}' is not a number", key, s));
    return v;
}

std::int64_t RunConfig::integer(std::string_view key) const {
    const auto& s = get(key);
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, s));
    return v;
}

std::size_t RunConfig::count(std::string_view key) const {
    const auto v = integer(key);
    if (v < 0) throw ConfigError(fmt::format("{}: must not be negative", key));
    return static_cast<std::size_t>(v);
}

bool RunConfig::flag(std::string_view key) const {
    const auto& s = get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, s));
}

std::optional<timeseries::Month> RunConfig::month(std::string_view key) const {
    const auto& s = get(key);
    if (s.empty()) return std::nullopt;
    try {
        return timeseries::Month::parse(s);
    } catch (const Error& e) {
        throw ConfigError(fmt::format("{}: {}", key, e.what()));
    }
}

std::vector<std::string> RunConfig::list(std::string_view key) const {
    std::vector<std::string> out;
    const auto& s = get(key);
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto next = std::min(s.find(',', pos), s.size());
        auto item = trim(s.substr(pos, next - pos));
        if (!item.empty()) out.push_back(std::move(item));
        pos = next + 1;
    }
    if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
    return out;
}

std::uint64_t RunConfig::seed() const {
    const auto& s = get("run.seed");
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(fmt::format("run.seed: '{}' is not a seed", s));
    return v;
}

std::size_t RunConfig::workers() const { return count("run.workers"); }

std::filesystem::path RunConfig::out_dir() const { return get("data.out"); }

std::filesystem::path RunConfig::input(std::string_view key) const {
    const auto& s = get(key);
    if (s.empty()) throw ConfigError(fmt::format("{}: no path given", key));
    return s;
}

std::string RunConfig::hash() const {
    std::string canon;
    for (const auto& k : keys())
        if (k.hashed) canon += k.key + "=" + get(k.key) + "\n";
    return fmt::format("{:016x}", fnv1a(canon));
}

std::string RunConfig::header(std::string_view command) const {
    return fmt::format("stressvar {} schema_version={} config_hash={} seed={}", command, kSchemaVersion, hash(), seed());
}

void RunConfig::write_ini(std::ostream& out) const {
    std::string section;
    for (const auto& k : keys()) {
        const auto dot = k.key.find('.');
        const auto sec = k.key.substr(0, dot);
        if (sec != section) {
            out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        out << "; " << k.doc << '\n' << k.key.substr(dot + 1) << " = " << get(k.key) << '\n';
    }
}

synth::SynthSpec RunConfig::synth_spec() const {
    synth::SynthSpec s;
    s.n_factors = count("synth.n_factors");
    s.n_funds = count("synth.n_funds");
    s.factor_months = count("synth.factor_months");
    s.fund_months = count("synth.fund_months");
    try {
        s.payoff = synth::parse_payoff(get("synth.payoff"));
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("synth.payoff: {}", e.what()));
    }
    s.noise_share = number("synth.noise_share");
    s.smoothing = number("synth.smoothing");
    s.tail_df = number("synth.tail_df");
    s.seed = seed();
    s.end = *month("synth.end");
    s.factor_vol = number("synth.factor_vol");
    s.factor_drift = number("synth.factor_drift");
    s.corr_pairs = count("synth.corr_pairs");
    s.corr = number("synth.corr");
    s.crash_factors = count("synth.crash_factors");
    s.crash_depth = number("synth.crash_depth");
    s.crash_months = count("synth.crash_months");
    s.final_year_crash = flag("synth.crisis");
    s.crisis_share = number("synth.crisis_share");
    s.death_drawdown = number("synth.death_drawdown");
    s.validate();
    return s;
}

scoring::ScoringConfig RunConfig::scoring_config() const {
    scoring::ScoringConfig c;
    c.window = count("model.window");
    c.ar_max = static_cast<int>(integer("model.ar_max"));
    c.lags_max = static_cast<int>(integer("model.lags_max"));
    c.degree_max = static_cast<int>(integer("model.degree_max"));
    if (c.ar_max < 0 || c.ar_max > 4) throw ConfigError("model.ar_max must be in [0, 4]");
    if (c.lags_max < 0 || c.lags_max > 4) throw ConfigError("model.lags_max must be in [0, 4]");
    if (c.degree_max < 1 || c.degree_max > 5) throw ConfigError("model.degree_max must be in [1, 5]");
    const auto& crit = get("model.criterion");
    if (crit == "bic") c.select.criterion = linmodel::Criterion::bic;
    else if (crit == "aic") c.select.criterion = linmodel::Criterion::aic;
    else throw ConfigError(fmt::format("model.criterion: '{}' is not bic or aic", crit));
    c.select.fit.ridge_scale = number("model.ridge_scale");
    if (c.select.fit.ridge_scale < 0.0) throw ConfigError("model.ridge_scale must be >= 0");
    c.max_selected = count("model.max_selected");
    if (c.max_selected < 1) throw ConfigError("model.max_selected must be >= 1");
    c.threshold.gamma = number("model.gamma");
    c.threshold.floor = number("model.threshold_floor");
    c.threshold.ceiling = number("model.threshold_ceiling");
    if (!(c.threshold.gamma > 0.0)) throw ConfigError("model.gamma must be > 0");
    if (!(c.threshold.floor > 0.0 && c.threshold.floor <= c.threshold.ceiling && c.threshold.ceiling < 1.0))
        throw ConfigError("model.threshold_floor/threshold_ceiling must satisfy 0 < floor <= ceiling < 1");
    return c;
}

backtest::EstimatorConfig RunConfig::estimator_config() const {
    backtest::EstimatorConfig e;
    e.scoring = scoring_config();
    e.window = e.scoring.window;
    if (e.window < 24) throw ConfigError("model.window must be >= 24");
    e.q = number("model.q");
    const double pct = e.q * 100.0;
    if (!(e.q >= 0.90 - 1e-12 && e.q <= 0.99 + 1e-12) || std::abs(pct - std::round(pct)) > 1e-9)
        throw ConfigError("model.q must lie on the 0.01 lattice in [0.90, 0.99]");
    e.z = number("model.z");
    if (!(e.z > 0.0)) throw ConfigError("model.z must be > 0");
    const auto& ls = get("model.lag_shock");
    if (ls == "sustained") e.scan.lag_shock = risk::LagShock::sustained;
    else if (ls == "zero") e.scan.lag_shock = risk::LagShock::zero;
    else throw ConfigError(fmt::format("model.lag_shock: '{}' is not sustained or zero", ls));
    e.factor_min_history = count("model.factor_min_history");
    if (e.factor_min_history < 2) throw ConfigError("model.factor_min_history must be >= 2");
    return e;
}

namespace {

risk::Measure measure_of(std::string_view key, const std::string& name) {
    try {
        return risk::parse_measure(name);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", key, e.what()));
    }
}

}  // namespace

backtest::BacktestConfig RunConfig::backtest_config(risk::Measure m) const {
    backtest::BacktestConfig b;
    b.estimator = estimator_config();
    b.measure = m;
    b.start = month("backtest.start");
    b.end = month("backtest.end");
    b.recalibrate_months = count("backtest.recalibrate_months");
    b.workers = workers();
    try {
        b.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("backtest: {}", e.what()));
    }
    return b;
}

alloc::AllocationConfig RunConfig::alloc_config(risk::Measure m) const {
    alloc::AllocationConfig a;
    a.select_fraction = number("alloc.select_fraction");
    a.weight_cap = number("alloc.weight_cap");
    a.leverage_cap = number("alloc.leverage_cap");
    a.rebalance_months = count("alloc.rebalance_months");
    a.risk_free_annual = number("alloc.risk_free");
    a.measure = m;
    a.start = month("alloc.start");
    a.end = month("alloc.end");
    a.seed = derive_seed(seed(), 0xA110C);
    a.validate();
    return a;
}

alloc::InvestorConfig RunConfig::investor_config() const {
    alloc::InvestorConfig i;
    i.n_sims = count("simulate.n_sims");
    i.sub_n = count("simulate.sub_n");
    i.pick_n = count("simulate.pick_n");
    if (i.n_sims < 1) throw ConfigError("simulate.n_sims must be >= 1");
    if (i.pick_n < 1 || i.pick_n > i.sub_n) throw ConfigError("simulate.pick_n must be in [1, sub_n]");
    i.seed = derive_seed(seed(), 0x51D);
    i.workers = workers();
    return i;
}

void RunConfig::validate() const {
    seed();
    workers();
    number("data.stop_loss");
    if (const double sl = number("data.stop_loss"); !(sl >= 0.0 && sl < 1.0))
        throw ConfigError("data.stop_loss must be in [0, 1)");
    kernels::parse_backend(get("run.kernels"));
    estimator_config();
    month("model.as_of");
    for (const auto& m : list("backtest.measures")) {
        const auto me = measure_of("backtest.measures", m);
        if (me == risk::Measure::random) throw ConfigError("backtest.measures: random has no VaR");
        backtest_config(me);
    }
    for (const auto& m : list("alloc.measures")) alloc_config(measure_of("alloc.measures", m));
    alloc_config(measure_of("simulate.measure", get("simulate.measure")));
    investor_config();
    synth_spec();
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 1;
    return 2;
}

}  // namespace svar::cli
