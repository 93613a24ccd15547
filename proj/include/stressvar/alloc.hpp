#pragma once

// Risk-ranked fund-of-funds construction: selection of the least risky
// funds, inverse-risk weights under a cap, leverage to universe-average
// risk, quarterly-rebalanced simulation and the investor Monte Carlo.

#include "stressvar/backtest.hpp"
#include "stressvar/riskmeasures.hpp"
#include "stressvar/timeseries.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svar::alloc {

using timeseries::Month;
using RiskMap = std::map<std::string, double>;

struct AllocationConfig {
    double select_fraction = 0.25;
    double weight_cap = 0.10;
    double leverage_cap = 3.0;
    std::size_t rebalance_months = 3;
    double risk_free_annual = 0.02;
    risk::Measure measure = risk::Measure::svar;
    // Overrides select_fraction with a fixed count (investor simulations).
    std::optional<std::size_t> select_count;
    // First rebalance and last month held. Default: first month any fund has
    // `window` prior returns, through the universe's last month.
    std::optional<Month> start, end;
    std::uint64_t seed = 1;  // random measure only

    void validate() const;
};

// ceil(fraction·n), at least 1 and at most n.
std::size_t selection_count(std::size_t n, double fraction);

// `count` lowest-risk ids, ties broken by id. DomainError on any ρ <= 0.
std::vector<std::string> select_lowest(const RiskMap& risks, std::size_t count);

struct WeightResult {
    RiskMap weights;
    bool cap_infeasible = false;
};

// w ∝ 1/ρ over `selected`, clipped at `cap` and renormalized to a fixpoint.
// When cap·count <= 1 the weights are equal; cap_infeasible when cap·count < 1.
WeightResult inverse_risk_weights(const RiskMap& selected, double cap);

// Selection plus weighting under cfg.
WeightResult weights(const RiskMap& risks, const AllocationConfig& cfg);

// min(cap, (N/|LR|)·Σ_LR 1/ρ / Σ_ALL 1/ρ)
double leverage(const RiskMap& all, const RiskMap& selected, double leverage_cap);

double monthly_rate(double annual);

struct PerformanceReport {
    std::optional<double> sharpe;  // empty when volatility is zero
    double annual_return = 0.0;
    double annual_vol = 0.0;
    double max_drawdown = 0.0;
    double pct_positive_months = 0.0;
    std::size_t max_time_to_recovery = 0;
    std::vector<double> monthly_returns;
};

// Needs 12 months. Wealth starts at 1 before the first month. A drawdown
// that is never recovered runs to the last month.
PerformanceReport performance_metrics(std::span<const double> monthly, double risk_free_annual);

std::vector<Month> rebalance_dates(const timeseries::FundUniverse& universe, const AllocationConfig& cfg,
                                   std::size_t window);

// Risk of every eligible fund at every rebalance date, per measure. A fund
// is eligible at t when it reports at t and has `window` returns before t.
class RiskTable {
public:
    RiskTable() = default;
    RiskTable(const timeseries::FundUniverse& universe, const backtest::RiskEstimator& estimator,
              std::span<const Month> dates, std::span<const risk::Measure> measures, std::size_t workers = 1);

    std::span<const Month> dates() const { return dates_; }
    std::size_t window() const { return window_; }
    // Funds with a non-positive or non-finite estimate are left out.
    const RiskMap& at(risk::Measure m, Month date) const;
    // Ids eligible at date regardless of measure.
    const std::vector<std::string>& eligible(Month date) const;

private:
    std::vector<Month> dates_;
    std::size_t window_ = 0;
    std::map<Month, std::vector<std::string>> eligible_;
    std::map<std::pair<risk::Measure, Month>, RiskMap> risks_;
};

struct Rebalance {
    Month date;
    RiskMap weights;
    double leverage = 0.0;
    bool cap_infeasible = false;
};

struct FofMonth {
    Month date;
    double monthly_return = 0.0;
    double leverage = 0.0;
};

struct FofResult {
    risk::Measure measure = risk::Measure::svar;
    std::vector<Rebalance> rebalances;
    std::vector<FofMonth> months;
    PerformanceReport performance;
};

// `subset` restricts the fund pool to those indices of `universe` (empty =
// all funds). Holdings are constant within a period; a fund without a return
// in a month contributes 0 (cash) until the next rebalance.
FofResult simulate_fof(const timeseries::FundUniverse& universe, const RiskTable& table, const AllocationConfig& cfg,
                       std::span<const std::size_t> subset = {});
FofResult simulate_fof(const timeseries::FundUniverse& universe, const timeseries::FactorPanel& panel,
                       const AllocationConfig& cfg, const backtest::EstimatorConfig& estimator = {});

// Equal-weight average of the funds reporting each month.
std::vector<double> market_returns(const timeseries::FundUniverse& universe, Month first, Month last);

struct InvestorConfig {
    std::size_t n_sims = 1000;
    std::size_t sub_n = 100;
    std::size_t pick_n = 10;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

struct InvestorSim {
    std::size_t sim_id = 0;
    std::string measure;
    double excess_return = 0.0;  // annualized, minus the full-universe market
};

// For each simulation: draw sub_n funds without replacement, allocate pick_n
// of them under cfg.measure and, on the same draw, at random.
std::vector<InvestorSim> simulate_investors(const timeseries::FundUniverse& universe, const RiskTable& table,
                                            const AllocationConfig& cfg, const InvestorConfig& inv);

// date,measure,monthly_return,leverage
void write_fof_csv(std::ostream& out, std::span<const FofResult> runs, std::span<const std::string> comment = {});

// metric,<column>... with rows sharpe, annual_return, annual_vol,
// max_drawdown, pct_positive_months, max_time_to_recovery
void write_performance_csv(std::ostream& out, std::span<const std::string> columns,
                           std::span<const PerformanceReport> reports, std::span<const std::string> comment = {});

// sim_id,measure,excess_return
void write_investor_csv(std::ostream& out, std::span<const InvestorSim> sims, std::span<const std::string> comment = {});

}  // namespace svar::alloc
