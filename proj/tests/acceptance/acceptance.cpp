// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "oracles.hpp"
#include "stressvar/alloc.hpp"
#include "stressvar/backtest.hpp"
#include "stressvar/cli.hpp"
#include "stressvar/linmodel.hpp"
#include "stressvar/riskmeasures.hpp"
#include "stressvar/scoring.hpp"
#include "stressvar/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

using namespace svar;
using risk::Measure;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > limit_s) {
        o.pass = false;
        o.detail += fmt::format("; over the {:.0f} s limit", limit_s);
    }
    failures += !o.pass;
    fmt::print("{} {} ({}) [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", name, o.detail, secs);
    std::fflush(stdout);
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n, double sd) {
    std::normal_distribution<double> d(0.0, sd);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

std::vector<double> ar1(std::mt19937_64& rng, std::size_t n, double phi, double sd) {
    auto e = gaussian(rng, n, sd);
    for (std::size_t t = 1; t < n; ++t) e[t] += phi * e[t - 1];
    return e;
}

linmodel::ModelFit fit_spec(std::span<const double> y, std::span<const double> x, linmodel::ModelSpec spec,
                            std::size_t skip) {
    return linmodel::fit(linmodel::build_design(y, x, spec, skip));
}

Outcome f_statistic_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> ar_d(0, 1), lag_d(0, 2), deg_d(1, 3), n_d(36, 120);
    const long double ridge = linmodel::FitOptions{}.ridge_scale;
    double worst_f = 0, worst_p = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const int ar = ar_d(rng), lags = lag_d(rng), deg = deg_d(rng);
        const auto n = static_cast<std::size_t>(n_d(rng));
        const auto x = gaussian(rng, n, 0.04);
        auto y = ar1(rng, n, 0.3, 0.02);
        const double beta = 0.2 * (rep % 5);
        for (std::size_t i = 0; i < n; ++i) y[i] += beta * x[i] - 2.0 * beta * x[i] * x[i];
        const auto skip = static_cast<std::size_t>(std::max(ar, lags));
        const auto full = fit_spec(y, x, linmodel::ModelSpec{ar, lags, deg, true}, skip);
        const auto restr = fit_spec(y, x, linmodel::ModelSpec::pure_ar(ar), skip);
        const auto r = linmodel::f_test(full, restr);

        const std::vector<double> target(y.begin() + static_cast<std::ptrdiff_t>(skip), y.end());
        const auto o1 = oracle::least_squares(oracle::design(y, x, ar, lags, deg, static_cast<int>(skip)), target, ridge);
        const auto o0 = oracle::least_squares(oracle::design(y, x, ar, 0, 0, static_cast<int>(skip)), target, ridge);
        const long double rows = static_cast<long double>(target.size());
        const long double k = 1 + ar + (lags + 1) * deg, q = (lags + 1) * deg;
        const long double f_ref = std::max(0.0L, (rows - k) / q * (o0.rss - o1.rss) / o1.rss);
        worst_f = std::max(worst_f, static_cast<double>(std::abs(r.f_stat - f_ref) / std::max(1.0L, f_ref)));
        const long double p_ref = f_ref > 0 ? oracle::f_upper_tail(f_ref, q, rows - k) : 1.0L;
        worst_p = std::max(worst_p, static_cast<double>(std::abs(r.p_value - p_ref)));
    }
    return {worst_f < 1e-10 && worst_p < 1e-6, fmt::format("max F error {:.2e} (rel), max p error {:.2e}", worst_f, worst_p)};
}

Outcome cfvar_oracle() {
    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> sig(0.0, 0.1), sk(-2, 2), ku(-1, 8);
    bool identity = true;
    double worst = 0;
    for (int rep = 0; rep < 100; ++rep) {
        risk::MomentEstimates m;
        m.sigma = sig(rng);
        m.skew = 0.0;
        m.ex_kurtosis = 0.0;
        identity &= risk::cfvar(m) == risk::gvar(m);
        m.skew = sk(rng);
        m.ex_kurtosis = ku(rng);
        const long double ref =
            std::max(0.0L, oracle::cf_var(m.sigma, *m.skew, *m.ex_kurtosis, static_cast<long double>(risk::kDefaultZ)));
        worst = std::max(worst, static_cast<double>(std::abs(risk::cfvar(m) - ref)));
    }
    return {identity && worst < 1e-12, fmt::format("identity {}, max error {:.2e}", identity ? "exact" : "broken", worst)};
}

Outcome weights_leverage_oracle() {
    std::mt19937_64 rng(103);
    std::uniform_real_distribution<double> u(0.002, 0.2);
    double worst_w = 0, worst_l = 0;
    int cap_binding = 0, lev_capped = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = 8 + static_cast<std::size_t>(rep % 150);
        alloc::RiskMap risks;
        for (std::size_t i = 0; i < n; ++i) risks[fmt::format("F{:04}", i)] = rep % 3 == 0 ? std::pow(u(rng), 2) : u(rng);
        alloc::AllocationConfig cfg;
        cfg.weight_cap = 0.05 + 0.01 * (rep % 20);
        cfg.select_fraction = 0.1 + 0.05 * (rep % 10);
        const auto chosen_ids = alloc::select_lowest(risks, alloc::selection_count(n, cfg.select_fraction));
        alloc::RiskMap chosen;
        for (const auto& id : chosen_ids) chosen[id] = risks.at(id);
        const auto w = alloc::weights(risks, cfg);
        const auto ref = oracle::capped_weights(chosen, cfg.weight_cap);
        if (w.weights.size() != ref.size()) return {false, "selected sets differ"};
        bool binding = false;
        for (const auto& [id, v] : w.weights) {
            worst_w = std::max(worst_w, std::abs(v - ref.at(id)));
            binding |= std::abs(v - cfg.weight_cap) < 1e-12;
        }
        cap_binding += binding;
        const double cap = 1.5 + 0.5 * (rep % 4);
        const double lev = alloc::leverage(risks, chosen, cap);
        worst_l = std::max(worst_l, std::abs(lev - oracle::leverage(risks, chosen, cap)));
        lev_capped += lev == cap;
    }
    const bool ok = worst_w < 1e-10 && worst_l < 1e-10 && cap_binding > 0 && lev_capped > 0;
    return {ok, fmt::format("max weight error {:.2e}, max leverage error {:.2e}; {} cap-binding and {} leverage-capped "
                            "cases of 1000",
                            worst_w, worst_l, cap_binding, lev_capped)};
}

Outcome drawdown_oracle() {
    std::mt19937_64 rng(104);
    std::normal_distribution<double> d(0.003, 0.04);
    int mismatches = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> r(12 + static_cast<std::size_t>(rep % 229));
        for (auto& v : r) v = std::max(d(rng), -0.9);
        const auto p = alloc::performance_metrics(r, 0.02);
        const auto o = oracle::drawdown(r);
        mismatches += p.max_drawdown != o.max_drawdown || p.max_time_to_recovery != o.max_recovery;
    }
    return {mismatches == 0, fmt::format("{} mismatches in 1000 series", mismatches)};
}

Outcome null_uniformity() {
    std::mt19937_64 rng(105);
    std::vector<double> p;
    for (int rep = 0; rep < 1000; ++rep) {
        const auto y = ar1(rng, 36, 0.3, 0.02);
        const auto x = gaussian(rng, 36, 0.04);
        const auto full = fit_spec(y, x, linmodel::ModelSpec{1, 1, 2, true}, 2);
        const auto restr = fit_spec(y, x, linmodel::ModelSpec::pure_ar(1), 2);
        p.push_back(linmodel::f_test(full, restr).p_value);
    }
    const double ks = oracle::ks_uniform(p);
    return {ks < 0.06, fmt::format("KS {:.4f} over 1000 null fits", ks)};
}

bool explains(const synth::TrueModel& m, const std::string& id) {
    return id == m.factor_id || std::find(m.proxies.begin(), m.proxies.end(), id) != m.proxies.end();
}

Outcome factor_recovery(const synth::Universe& u) {
    const backtest::EstimatorConfig est;
    auto sc = est.scoring;
    sc.window = est.window;
    std::size_t hits = 0;
    for (const auto& fund : u.funds.funds()) {
        const auto prof = scoring::build_profile(fund, u.panel, sc);
        hits += !prof.selected.empty() && explains(u.truth.at(fund.id()), prof.selected.front().factor_id);
    }
    const double rate = static_cast<double>(hits) / static_cast<double>(u.funds.size());
    return {rate >= 0.90, fmt::format("{}/{} funds ({:.1f}%)", hits, u.funds.size(), 100 * rate)};
}

backtest::ExceptionStats svar_exceptions(const synth::Universe& u) {
    const backtest::RiskEstimator est(u.panel, {});
    backtest::BacktestConfig cfg;
    cfg.measure = Measure::svar;
    return backtest::count_exceptions(backtest::rolling_var(u.funds, est, cfg));
}

Outcome exception_calibration(const synth::Universe& standard) {
    const auto s = svar_exceptions(standard);
    const bool ok = s.rate_1x >= 0.005 && s.rate_1x <= 0.035 && s.rate_2x < s.rate_1x / 3;
    synth::SynthSpec crisis;
    crisis.final_year_crash = true;
    const auto c = svar_exceptions(synth::generate(crisis));
    return {ok, fmt::format("rate_1x {:.2f}%, rate_2x {:.2f}%, rate_3x {:.2f}% over {} fund-months; crisis universe "
                            "rate_1x {:.2f}%, rate_2x {:.2f}%",
                            100 * s.rate_1x, 100 * s.rate_2x, 100 * s.rate_3x, s.n_fund_months, 100 * c.rate_1x,
                            100 * c.rate_2x)};
}

Outcome hidden_crisis(const synth::Universe& u) {
    const backtest::RiskEstimator est(u.panel, {});
    std::size_t n = 0, hits = 0;
    for (const auto& fund : u.funds.funds()) {
        const auto& m = u.truth.at(fund.id());
        if (!m.pre_inception_crash || m.payoff != synth::Payoff::short_put) continue;
        ++n;
        const auto at = fund.end() + 1;
        hits += est.svar(fund, at)->svar > 1.5 * *est.estimate(fund, at, Measure::gvar);
    }
    const double rate = n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
    return {n > 0 && rate >= 0.80, fmt::format("{}/{} short-put funds ({:.1f}%)", hits, n, 100 * rate)};
}

struct MeanSe {
    double mean = 0, se = 0;
};

MeanSe mean_se(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = 0;
    for (double x : v) m += x / n;
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / (n - 1) / n)};
}

Outcome allocation_study() {
    constexpr int kRuns = 100, kInvestorRuns = 50;
    std::vector<double> svar_ret, rnd_ret, excess;
    int dd_wins = 0;
    for (int run = 0; run < kRuns; ++run) {
        synth::SynthSpec spec;
        spec.final_year_crash = true;
        spec.seed = 1 + static_cast<std::uint64_t>(run);
        const auto u = synth::generate(spec);
        const backtest::RiskEstimator est(u.panel, {});
        alloc::AllocationConfig cfg;
        cfg.seed = spec.seed;
        const auto dates = alloc::rebalance_dates(u.funds, cfg, est.config().window);
        const std::array<Measure, 3> ms{Measure::svar, Measure::gvar, Measure::random};
        const alloc::RiskTable table(u.funds, est, dates, ms);
        std::map<Measure, alloc::PerformanceReport> perf;
        for (auto m : ms) {
            cfg.measure = m;
            perf[m] = alloc::simulate_fof(u.funds, table, cfg).performance;
        }
        svar_ret.push_back(perf[Measure::svar].annual_return);
        rnd_ret.push_back(perf[Measure::random].annual_return);
        dd_wins += perf[Measure::svar].max_drawdown > perf[Measure::gvar].max_drawdown;

        if (run < kInvestorRuns) {
            cfg.measure = Measure::random;
            alloc::InvestorConfig inv;
            inv.n_sims = 100;
            inv.seed = spec.seed;
            for (const auto& s : alloc::simulate_investors(u.funds, table, cfg, inv)) excess.push_back(s.excess_return);
        }
    }
    const auto sv = mean_se(svar_ret), rn = mean_se(rnd_ret), ex = mean_se(excess);
    const double win_rate = static_cast<double>(dd_wins) / kRuns;
    const bool ok_ret = sv.mean > rn.mean, ok_dd = win_rate >= 0.80, ok_ex = std::abs(ex.mean) <= 2 * ex.se;
    return {ok_ret && ok_dd && ok_ex,
            fmt::format("mean annual return svar {:.2f}% vs random {:.2f}% [{}]; svar drawdown smaller than gvar in "
                        "{}/{} runs [{}]; random investor excess {:.3f}% +/- {:.3f}% (SE) over {} sims [{}]",
                        100 * sv.mean, 100 * rn.mean, ok_ret ? "ok" : "fail", dd_wins, kRuns, ok_dd ? "ok" : "fail",
                        100 * ex.mean, 100 * ex.se, excess.size(), ok_ex ? "ok" : "fail")};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "stressvar_acceptance_determinism";
    fs::remove_all(dir);
    cli::RunConfig cfg;
    cfg.set("data.out", dir.string());
    cfg.set("data.funds", (dir / "funds.csv").string());
    cfg.set("data.factors", (dir / "factors.csv").string());
    cfg.set("synth.n_funds", "40");
    cfg.set("synth.crisis", "true");
    cfg.set("simulate.n_sims", "50");
    cfg.set("simulate.sub_n", "30");
    cfg.set("simulate.pick_n", "8");
    using Cmd = std::vector<fs::path> (*)(const cli::RunConfig&);
    const std::array<Cmd, 6> cmds{cli::cmd_synth, cli::cmd_score,    cli::cmd_svar,
                                  cli::cmd_backtest, cli::cmd_allocate, cli::cmd_simulate};
    std::vector<fs::path> files;
    std::vector<std::string> first;
    for (auto c : cmds)
        for (const auto& p : c(cfg)) files.push_back(p), first.push_back(slurp(p));
    std::size_t same = 0;
    for (auto c : cmds)
        for (const auto& p : c(cfg)) {
            const auto i = static_cast<std::size_t>(std::find(files.begin(), files.end(), p) - files.begin());
            same += i < files.size() && slurp(p) == first[i];
        }
    fs::remove_all(dir);
    return {same == files.size(), fmt::format("{}/{} output files identical on rerun", same, files.size())};
}

}  // namespace

int main() {
    criterion("F statistic and p-value match the residual-sum oracle", 10, f_statistic_oracle);
    criterion("Cornish-Fisher VaR matches scalar evaluation", 1, cfvar_oracle);
    criterion("weights and leverage match brute-force oracles", 10, weights_leverage_oracle);
    criterion("max drawdown and time to recovery match brute force", 30, drawdown_oracle);
    criterion("null p-values are uniform", 120, null_uniformity);

    synth::SynthSpec standard_spec;
    const auto standard = synth::generate(standard_spec);
    criterion("true factor or proxy ranks first in at least 90% of funds", 300, [&] { return factor_recovery(standard); });
    criterion("out-of-sample StressVaR exceptions in [0.5%, 3.5%] with rate_2x < rate_1x/3", 600,
              [&] { return exception_calibration(standard); });
    criterion("hidden crisis: svar > 1.5 gvar for at least 80% of short-put funds", 120,
              [&] { return hidden_crisis(standard); });
    criterion("allocation study over 100 crisis universes", 900, allocation_study);
    criterion("pipeline rerun is byte-identical", 300, determinism);

    fmt::print("{} criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
