#pragma once

// Out-of-sample VaR backtests: rolling estimation from past data only,
// pooled exception counting and the normalized-return Gaussianity check.

#include "stressvar/riskmeasures.hpp"
#include "stressvar/scoring.hpp"
#include "stressvar/timeseries.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svar::backtest {

using timeseries::Month;

struct EstimatorConfig {
    std::size_t window = 36;
    double q = 0.98;               // StressVaR coverage
    double z = risk::kDefaultZ;    // Gaussian and Cornish-Fisher quantile
    scoring::ScoringConfig scoring;  // scoring.window is overridden by window
    risk::ScanOptions scan;
    std::size_t factor_min_history = timeseries::FactorPanel::kDefaultMinHistory;
};

// Risk of a fund computed from data strictly before a date. Quantile curves
// are built once per date and cached; safe to share between threads.
class RiskEstimator {
public:
    RiskEstimator(const timeseries::FactorPanel& panel, EstimatorConfig cfg);

    const EstimatorConfig& config() const { return cfg_; }

    // nullopt when the fund has fewer than `window` returns before `at`.
    std::optional<double> estimate(const timeseries::ReturnSeries& fund, Month at, risk::Measure m) const;
    std::optional<risk::SvarResult> svar(const timeseries::ReturnSeries& fund, Month at) const;

private:
    struct DateState {
        timeseries::FactorPanel panel;  // factors with enough history before the date
        risk::CurveMap curves;
    };
    const DateState& state(Month at) const;

    const timeseries::FactorPanel* panel_;
    EstimatorConfig cfg_;
    mutable std::mutex mutex_;
    mutable std::map<Month, std::unique_ptr<DateState>> states_;
};

struct BacktestConfig {
    EstimatorConfig estimator;
    risk::Measure measure = risk::Measure::svar;
    // Evaluation span, inclusive. Defaults to every month of the universe.
    std::optional<Month> start, end;
    // StressVaR profiles are recalibrated every this many months (1 = monthly).
    std::size_t recalibrate_months = 3;
    std::size_t workers = 1;

    void validate() const;
};

struct VarPoint {
    std::string fund_id;
    Month date;
    double var = 0.0;
    double realized = 0.0;
};

struct RollingVar {
    risk::Measure measure = risk::Measure::gvar;
    std::vector<VarPoint> points;  // ordered by (fund id, date)
    std::size_t skipped = 0;       // fund-months in span without `window` prior months
};

RollingVar rolling_var(const timeseries::FundUniverse& universe, const RiskEstimator& estimator,
                       const BacktestConfig& cfg);
RollingVar rolling_var(const timeseries::FundUniverse& universe, const timeseries::FactorPanel& panel,
                       const BacktestConfig& cfg);

struct ExceptionStats {
    double rate_1x = 0.0, rate_2x = 0.0, rate_3x = 0.0;
    // loss / VaR over 1x exception months; empty without exceptions
    std::optional<double> mean_excess, median_excess;
    std::size_t n_fund_months = 0;  // valid months only
    std::size_t n_exceptions = 0;
    std::size_t n_invalid = 0;      // VaR <= 0 in a losing month, excluded
};

// Exception at multiplier m when realized < -m·VaR.
ExceptionStats count_exceptions(std::span<const double> var, std::span<const double> realized);
ExceptionStats count_exceptions(const RollingVar& rv);

// sup |F_n - Φ| for a sample taken as already standardized.
double ks_normal_distance(std::span<const double> sample);

// KS distance of r/VaR, demeaned and scaled to unit variance, from N(0,1).
// Months with VaR <= 0 are dropped. Needs 24 normalized observations;
// DegenerateInputError for a constant series.
double gaussianity_score(std::span<const double> realized, std::span<const double> var);
double gaussianity_score(const RollingVar& rv);

struct MeasureSummary {
    std::string measure;
    ExceptionStats stats;
    std::optional<double> ks_distance;
};

// measure,rate_1x,rate_2x,rate_3x,mean_excess,median_excess,n_fund_months,n_invalid,ks_distance
void write_exceptions_csv(std::ostream& out, std::span<const MeasureSummary> rows,
                          std::span<const std::string> comment = {});

// measure,fund_id,date,return,var,normalized
void write_normalized_csv(std::ostream& out, std::span<const RollingVar> runs, std::span<const std::string> comment = {});

}  // namespace svar::backtest
