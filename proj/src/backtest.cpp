#include "stressvar/backtest.hpp"

#include "stressvar/errors.hpp"
#include "stressvar/kernels.hpp"
#include "stressvar/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace svar::backtest {

using timeseries::ReturnSeries;

RiskEstimator::RiskEstimator(const timeseries::FactorPanel& panel, EstimatorConfig cfg)
    : panel_(&panel), cfg_(std::move(cfg)) {
    if (cfg_.window < 24) throw ConfigError("model.window must be >= 24");
    cfg_.scoring.window = cfg_.window;
}

const RiskEstimator::DateState& RiskEstimator::state(Month at) const {
    std::lock_guard lock(mutex_);
    auto it = states_.find(at);
    if (it != states_.end()) return *it->second;
    auto st = std::make_unique<DateState>();
    std::vector<ReturnSeries> usable;
    const auto& grid = factordist::standard_grid();
    for (const auto& f : panel_->factors()) {
        if (f.all_before(at).size() < cfg_.factor_min_history) continue;
        usable.push_back(f);
        st->curves.emplace(f.id(), factordist::empirical_quantiles(f, grid, cfg_.factor_min_history, at));
    }
    if (!usable.empty()) st->panel = timeseries::FactorPanel(std::move(usable), cfg_.factor_min_history);
    return *states_.emplace(at, std::move(st)).first->second;
}

std::optional<risk::SvarResult> RiskEstimator::svar(const ReturnSeries& fund, Month at) const {
    const auto hist = fund.history_before(at, cfg_.window);
    if (hist.size() < cfg_.window) return std::nullopt;
    const auto& st = state(at);
    scoring::RiskProfile profile;
    profile.fund_id = fund.id();
    if (st.panel.size() > 0) {
        try {
            profile = scoring::build_profile(fund, st.panel, cfg_.scoring, at);
        } catch (const EmptyProfileError&) {
        }
    }
    return risk::stress_var(profile, st.curves, cfg_.q, hist, cfg_.scan);
}

std::optional<double> RiskEstimator::estimate(const ReturnSeries& fund, Month at, risk::Measure m) const {
    const auto hist = fund.history_before(at, cfg_.window);
    if (hist.size() < cfg_.window) return std::nullopt;
    switch (m) {
        case risk::Measure::gvar:
            return risk::gvar(risk::estimate_moments(hist), cfg_.z);
        case risk::Measure::cfvar: {
            const auto mom = risk::estimate_moments(hist);
            return mom.skew ? risk::cfvar(mom, cfg_.z) : risk::gvar(mom, cfg_.z);
        }
        case risk::Measure::svar:
            return svar(fund, at)->svar;
        case risk::Measure::random:
            break;
    }
    throw ContractError("the random measure has no risk estimate");
}

void BacktestConfig::validate() const {
    if (estimator.window < 24) throw ConfigError("model.window must be >= 24");
    if (measure == risk::Measure::random) throw ConfigError("backtest.measure must be gvar, cfvar or svar");
    if (recalibrate_months < 1) throw ConfigError("backtest.recalibrate_months must be >= 1");
    if (start && end && *start > *end) throw ConfigError("backtest.start is after backtest.end");
}

RollingVar rolling_var(const timeseries::FundUniverse& universe, const RiskEstimator& estimator,
                       const BacktestConfig& cfg) {
    cfg.validate();
    const auto window = static_cast<int>(estimator.config().window);
    const auto step = static_cast<int>(cfg.recalibrate_months);

    struct Slot {
        std::vector<VarPoint> points;
        std::size_t skipped = 0;
    };
    std::vector<Slot> slots(universe.size());
    parallel_for(universe.size(), cfg.workers, [&](std::size_t i) {
        const auto& fund = universe[i];
        const Month lo = std::max(cfg.start.value_or(fund.start()), fund.start());
        const Month hi = std::min(cfg.end.value_or(fund.end()), fund.end());
        const Month first_eval = fund.start() + window;
        std::optional<Month> anchor;
        double anchored_var = 0.0;
        for (Month t = lo; t <= hi; t = t + 1) {
            if (t < first_eval) {
                ++slots[i].skipped;
                continue;
            }
            double v = 0.0;
            if (cfg.measure == risk::Measure::svar) {
                if (!anchor) anchor = t;
                const Month a = *anchor + ((t - *anchor) / step) * step;
                if (a != *anchor || slots[i].points.empty()) {
                    anchor = a;
                    anchored_var = estimator.svar(fund, a)->svar;
                }
                v = anchored_var;
            } else {
                v = *estimator.estimate(fund, t, cfg.measure);
            }
            slots[i].points.push_back({fund.id(), t, v, *fund.at(t)});
        }
    });

    RollingVar out;
    out.measure = cfg.measure;
    for (auto& s : slots) {
        out.skipped += s.skipped;
        out.points.insert(out.points.end(), std::make_move_iterator(s.points.begin()),
                          std::make_move_iterator(s.points.end()));
    }
    return out;
}

RollingVar rolling_var(const timeseries::FundUniverse& universe, const timeseries::FactorPanel& panel,
                       const BacktestConfig& cfg) {
    const RiskEstimator estimator(panel, cfg.estimator);
    return rolling_var(universe, estimator, cfg);
}

ExceptionStats count_exceptions(std::span<const double> var, std::span<const double> realized) {
    if (var.size() != realized.size()) throw ContractError("VaR and realized series differ in length");
    ExceptionStats st;
    std::vector<double> v, r;
    v.reserve(var.size());
    r.reserve(var.size());
    for (std::size_t i = 0; i < var.size(); ++i) {
        const bool usable = std::isfinite(var[i]) && var[i] > 0.0;
        if (!usable && !(realized[i] >= 0.0 && !std::isnan(var[i]))) {
            ++st.n_invalid;
            continue;
        }
        v.push_back(usable ? var[i] : 0.0);
        r.push_back(realized[i]);
    }
    st.n_fund_months = v.size();
    if (v.empty()) return st;
    const double n = static_cast<double>(v.size());
    const auto c1 = kernels::count_below(r, v, 1.0);
    st.rate_1x = static_cast<double>(c1) / n;
    st.rate_2x = static_cast<double>(kernels::count_below(r, v, 2.0)) / n;
    st.rate_3x = static_cast<double>(kernels::count_below(r, v, 3.0)) / n;
    st.n_exceptions = c1;
    if (c1 == 0) return st;

    std::vector<double> excess;
    excess.reserve(c1);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (r[i] < -v[i]) excess.push_back(-r[i] / v[i]);
    std::sort(excess.begin(), excess.end());
    st.mean_excess = std::accumulate(excess.begin(), excess.end(), 0.0) / static_cast<double>(excess.size());
    const std::size_t mid = excess.size() / 2;
    st.median_excess = excess.size() % 2 ? excess[mid] : 0.5 * (excess[mid - 1] + excess[mid]);
    return st;
}

ExceptionStats count_exceptions(const RollingVar& rv) {
    std::vector<double> v, r;
    v.reserve(rv.points.size());
    r.reserve(rv.points.size());
    for (const auto& p : rv.points) {
        v.push_back(p.var);
        r.push_back(p.realized);
    }
    return count_exceptions(v, r);
}

double ks_normal_distance(std::span<const double> sample) {
    if (sample.empty()) throw ContractError("KS distance of an empty sample");
    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double cdf = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
        d = std::max({d, cdf - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - cdf});
    }
    return d;
}

double gaussianity_score(std::span<const double> realized, std::span<const double> var) {
    if (var.size() != realized.size()) throw ContractError("VaR and realized series differ in length");
    std::vector<double> z;
    for (std::size_t i = 0; i < var.size(); ++i)
        if (std::isfinite(var[i]) && var[i] > 0.0) z.push_back(realized[i] / var[i]);
    if (z.size() < 24) throw InsufficientHistoryError("gaussianity check needs 24 normalized returns");
    const auto [mn, mx] = std::minmax_element(z.begin(), z.end());
    if (*mn == *mx) throw DegenerateInputError("normalized returns are constant");
    const double n = static_cast<double>(z.size());
    const double mean = kernels::sum(z) / n;
    const double sd = std::sqrt(kernels::central_sums(z, mean)[0] / (n - 1.0));
    for (auto& x : z) x = (x - mean) / sd;
    return ks_normal_distance(z);
}

double gaussianity_score(const RollingVar& rv) {
    std::vector<double> v, r;
    for (const auto& p : rv.points) {
        v.push_back(p.var);
        r.push_back(p.realized);
    }
    return gaussianity_score(r, v);
}

namespace {

std::string opt_field(const std::optional<double>& x) { return x ? fmt::format("{}", *x) : std::string(); }

void write_comment(std::ostream& out, std::span<const std::string> comment) {
    for (const auto& c : comment) out << "# " << c << '\n';
}

}  // namespace

void write_exceptions_csv(std::ostream& out, std::span<const MeasureSummary> rows, std::span<const std::string> comment) {
    write_comment(out, comment);
    out << "measure,rate_1x,rate_2x,rate_3x,mean_excess,median_excess,n_fund_months,n_invalid,ks_distance\n";
    for (const auto& r : rows)
        out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.measure, r.stats.rate_1x, r.stats.rate_2x, r.stats.rate_3x,
                           opt_field(r.stats.mean_excess), opt_field(r.stats.median_excess), r.stats.n_fund_months,
                           r.stats.n_invalid, opt_field(r.ks_distance));
}

void write_normalized_csv(std::ostream& out, std::span<const RollingVar> runs, std::span<const std::string> comment) {
    write_comment(out, comment);
    out << "measure,fund_id,date,return,var,normalized\n";
    for (const auto& run : runs) {
        const auto name = risk::measure_name(run.measure);
        for (const auto& p : run.points) {
            const std::string norm = p.var > 0.0 ? fmt::format("{}", p.realized / p.var) : std::string();
            out << fmt::format("{},{},{},{},{},{}\n", name, p.fund_id, p.date.to_string(), p.realized, p.var, norm);
        }
    }
}

}  // namespace svar::backtest
