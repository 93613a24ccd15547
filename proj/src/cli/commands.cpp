#include "stressvar/cli.hpp"

#include "stressvar/errors.hpp"
#include "stressvar/kernels.hpp"
#include "stressvar/parallel.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

namespace svar::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using timeseries::Month;

namespace {

void prepare(const RunConfig& cfg) {
    cfg.validate();
    kernels::set_backend(kernels::parse_backend(cfg.get("run.kernels")));
}

fs::path output(const RunConfig& cfg, const std::string& name) {
    const auto dir = cfg.out_dir();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
    return dir / name;
}

template <class Fn>
fs::path write_file(const RunConfig& cfg, const std::string& name, Fn&& body) {
    const auto path = output(cfg, name);
    std::ostringstream buf;
    body(buf);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << buf.str();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
    return path;
}

json report_head(const RunConfig& cfg, std::string_view command) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = command;
    j["config_hash"] = cfg.hash();
    j["seed"] = cfg.seed();
    return j;
}

json spec_json(const linmodel::ModelSpec& s) {
    return {{"ar_order", s.ar_order},
            {"factor_lags", s.factor_lags},
            {"degree", s.degree},
            {"intercept", s.include_intercept}};
}

json score_json(const scoring::FactorScore& s) {
    json j;
    j["factor_id"] = s.factor_id;
    j["p_value"] = s.f_result.p_value;
    j["f_stat"] = s.f_result.f_stat;
    j["df_num"] = s.f_result.df_num;
    j["df_den"] = s.f_result.df_den;
    j["r_squared"] = s.fit.r_squared;
    j["residual_std"] = s.fit.residual_std;
    j["n_obs"] = s.fit.n_obs;
    j["spec"] = spec_json(s.fit.spec);
    j["scaling"] = {{"center", s.fit.scaling.center}, {"scale", s.fit.scaling.scale}};
    j["coefficients"] = std::vector<double>(s.fit.coefficients.data(), s.fit.coefficients.data() + s.fit.coefficients.size());
    j["degenerate"] = s.degenerate;
    return j;
}

json profile_json(const scoring::RiskProfile& p) {
    json j;
    j["fund_id"] = p.fund_id;
    j["window"] = p.window;
    j["fund_ar_order"] = p.fund_ar_order;
    j["threshold_used"] = p.threshold_used;
    j["n_factors_tested"] = p.n_factors_tested;
    j["low_confidence"] = p.low_confidence;
    j["selected"] = json::array();
    for (const auto& s : p.selected) j["selected"].push_back(score_json(s));
    j["skipped"] = json::array();
    for (const auto& s : p.skipped) j["skipped"].push_back({{"factor_id", s.factor_id}, {"reason", s.reason}});
    return j;
}

void write_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

std::vector<risk::Measure> measures(const RunConfig& cfg, std::string_view key) {
    std::vector<risk::Measure> out;
    for (const auto& m : cfg.list(key)) {
        const auto me = risk::parse_measure(m);
        if (std::find(out.begin(), out.end(), me) == out.end()) out.push_back(me);
    }
    return out;
}

// Calibration date for a fund in score/svar: model.as_of or just past the fund's data.
Month cut_for(const timeseries::ReturnSeries& fund, const std::optional<Month>& as_of) {
    return as_of.value_or(fund.end() + 1);
}

}  // namespace

Inputs load_inputs(const RunConfig& cfg) {
    const auto min_history = cfg.count("model.factor_min_history");
    Inputs in;
    in.panel = timeseries::FactorPanel(timeseries::load_csv(cfg.input("data.factors").string(),
                                                            timeseries::SeriesKind::factor),
                                       min_history);
    const timeseries::FundUniverse raw(
        timeseries::load_csv(cfg.input("data.funds").string(), timeseries::SeriesKind::fund));
    in.funds = timeseries::apply_stop_loss(raw, in.panel.last_date(), cfg.number("data.stop_loss"));
    return in;
}

std::vector<fs::path> cmd_synth(const RunConfig& cfg) {
    prepare(cfg);
    const auto u = synth::generate(cfg.synth_spec());
    const std::vector<std::string> head{cfg.header("synth")};
    std::vector<fs::path> out;
    out.push_back(write_file(cfg, "funds.csv", [&](std::ostream& o) { timeseries::write_csv(o, u.funds.funds(), head); }));
    out.push_back(
        write_file(cfg, "factors.csv", [&](std::ostream& o) { timeseries::write_csv(o, u.panel.factors(), head); }));
    out.push_back(write_file(cfg, "ground_truth.csv", [&](std::ostream& o) { synth::write_ground_truth(o, u.truth, head); }));
    return out;
}

std::vector<fs::path> cmd_score(const RunConfig& cfg) {
    prepare(cfg);
    const auto in = load_inputs(cfg);
    const auto sc = cfg.scoring_config();
    const auto as_of = cfg.month("model.as_of");

    struct Slot {
        std::optional<scoring::RiskProfile> profile;
        std::string reason;
    };
    std::vector<Slot> slots(in.funds.size());
    parallel_for(in.funds.size(), cfg.workers(), [&](std::size_t i) {
        const auto& fund = in.funds[i];
        try {
            slots[i].profile = scoring::build_profile(fund, in.panel, sc, cut_for(fund, as_of));
        } catch (const EmptyProfileError& e) {
            slots[i].reason = e.what();
        }
    });

    json j = report_head(cfg, "score");
    j["as_of"] = as_of ? as_of->to_string() : "";
    j["profiles"] = json::array();
    j["unscored"] = json::array();
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].profile) j["profiles"].push_back(profile_json(*slots[i].profile));
        else j["unscored"].push_back({{"fund_id", in.funds[i].id()}, {"reason", slots[i].reason}});
    }
    return {write_file(cfg, "profiles.json", [&](std::ostream& o) { write_json(o, j); })};
}

std::vector<fs::path> cmd_svar(const RunConfig& cfg) {
    prepare(cfg);
    const auto in = load_inputs(cfg);
    const auto est_cfg = cfg.estimator_config();
    const backtest::RiskEstimator est(in.panel, est_cfg);
    const auto as_of = cfg.month("model.as_of");

    struct Slot {
        std::optional<risk::SvarResult> svar;
        double gvar = 0.0, cfvar = 0.0;
    };
    std::vector<Slot> slots(in.funds.size());
    parallel_for(in.funds.size(), cfg.workers(), [&](std::size_t i) {
        const auto& fund = in.funds[i];
        const Month at = cut_for(fund, as_of);
        slots[i].svar = est.svar(fund, at);
        if (slots[i].svar) {
            slots[i].gvar = *est.estimate(fund, at, risk::Measure::gvar);
            slots[i].cfvar = *est.estimate(fund, at, risk::Measure::cfvar);
        }
    });

    json j = report_head(cfg, "svar");
    j["as_of"] = as_of ? as_of->to_string() : "";
    j["q"] = est_cfg.q;
    j["results"] = json::array();
    j["unscored"] = json::array();
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto& s = slots[i];
        if (!s.svar) {
            j["unscored"].push_back({{"fund_id", in.funds[i].id()},
                                     {"reason", fmt::format("fewer than {} months of history", est_cfg.window)}});
            continue;
        }
        json r;
        r["fund_id"] = s.svar->fund_id;
        r["q"] = s.svar->q;
        r["svar"] = s.svar->svar;
        r["worst_factor_id"] = s.svar->worst_factor_id;
        r["per_factor_losses"] = s.svar->per_factor_losses;
        r["specific_risk"] = s.svar->specific_risk;
        r["fallback"] = s.svar->fallback;
        r["gvar"] = s.gvar;
        r["cfvar"] = s.cfvar;
        j["results"].push_back(std::move(r));
    }

    std::vector<factordist::QuantileCurve> curves;
    const auto& grid = factordist::standard_grid();
    for (const auto& f : in.panel.factors()) {
        if (as_of && f.all_before(*as_of).size() < est_cfg.factor_min_history) continue;
        curves.push_back(factordist::empirical_quantiles(f, grid, est_cfg.factor_min_history, as_of));
    }
    const std::vector<std::string> head{cfg.header("svar")};
    return {write_file(cfg, "svar.json", [&](std::ostream& o) { write_json(o, j); }),
            write_file(cfg, "curves.csv", [&](std::ostream& o) { factordist::write_curves_csv(o, curves, head); })};
}

std::vector<fs::path> cmd_backtest(const RunConfig& cfg) {
    prepare(cfg);
    const auto in = load_inputs(cfg);
    const backtest::RiskEstimator est(in.panel, cfg.estimator_config());
    std::vector<backtest::RollingVar> runs;
    std::vector<backtest::MeasureSummary> rows;
    for (auto m : measures(cfg, "backtest.measures")) {
        runs.push_back(backtest::rolling_var(in.funds, est, cfg.backtest_config(m)));
        backtest::MeasureSummary row{risk::measure_name(m), backtest::count_exceptions(runs.back()), std::nullopt};
        try {
            row.ks_distance = backtest::gaussianity_score(runs.back());
        } catch (const InsufficientHistoryError&) {
        } catch (const DegenerateInputError&) {
        }
        rows.push_back(std::move(row));
    }
    const std::vector<std::string> head{cfg.header("backtest")};
    return {write_file(cfg, "exceptions.csv", [&](std::ostream& o) { backtest::write_exceptions_csv(o, rows, head); }),
            write_file(cfg, "normalized_returns.csv",
                       [&](std::ostream& o) { backtest::write_normalized_csv(o, runs, head); })};
}

std::vector<fs::path> cmd_allocate(const RunConfig& cfg) {
    prepare(cfg);
    const auto in = load_inputs(cfg);
    const backtest::RiskEstimator est(in.panel, cfg.estimator_config());
    const auto ms = measures(cfg, "alloc.measures");
    const auto base = cfg.alloc_config(ms.front());
    const auto dates = alloc::rebalance_dates(in.funds, base, est.config().window);
    const alloc::RiskTable table(in.funds, est, dates, ms, cfg.workers());

    std::vector<alloc::FofResult> runs;
    for (auto m : ms) runs.push_back(alloc::simulate_fof(in.funds, table, cfg.alloc_config(m)));

    const Month last = base.end.value_or(in.funds.last_date());
    const auto market = alloc::market_returns(in.funds, dates.front(), last);
    std::vector<std::string> columns{"market"};
    std::vector<alloc::PerformanceReport> reports{alloc::performance_metrics(market, base.risk_free_annual)};
    for (const auto& r : runs) {
        columns.push_back(risk::measure_name(r.measure));
        reports.push_back(r.performance);
    }
    const std::vector<std::string> head{cfg.header("allocate")};
    return {write_file(cfg, "fof_returns.csv",
                       [&](std::ostream& o) {
                           alloc::write_fof_csv(o, runs, head);
                           for (std::size_t t = 0; t < market.size(); ++t)
                               o << fmt::format("{},market,{},1\n", (dates.front() + static_cast<int>(t)).to_string(),
                                                market[t]);
                       }),
            write_file(cfg, "performance.csv",
                       [&](std::ostream& o) { alloc::write_performance_csv(o, columns, reports, head); })};
}

std::vector<fs::path> cmd_simulate(const RunConfig& cfg) {
    prepare(cfg);
    const auto in = load_inputs(cfg);
    const backtest::RiskEstimator est(in.panel, cfg.estimator_config());
    const auto m = risk::parse_measure(cfg.get("simulate.measure"));
    const auto acfg = cfg.alloc_config(m);
    const auto dates = alloc::rebalance_dates(in.funds, acfg, est.config().window);
    const std::vector<risk::Measure> ms{m};
    const alloc::RiskTable table(in.funds, est, dates, ms, cfg.workers());
    const auto sims = alloc::simulate_investors(in.funds, table, acfg, cfg.investor_config());
    const std::vector<std::string> head{cfg.header("simulate")};
    return {write_file(cfg, "investor_sims.csv", [&](std::ostream& o) { alloc::write_investor_csv(o, sims, head); })};
}

}  // namespace svar::cli
