#pragma once

// Long-history factor return distributions as empirical quantile curves.

#include "stressvar/timeseries.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svar::factordist {

// 0.01, 0.02, ..., 0.99
const std::vector<double>& standard_grid();

struct QuantileCurve {
    std::string factor_id;
    std::vector<double> grid;
    std::vector<double> values;  // nondecreasing along grid
    std::size_t n_history = 0;
};

// Quantile at probability p by linear interpolation between order statistics
// at zero-based position p·(n-1). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);

// Uses the factor's full history (strictly before `before` when given).
// Throws InsufficientHistoryError below min_history observations.
QuantileCurve empirical_quantiles(const timeseries::ReturnSeries& factor, std::span<const double> grid,
                                  std::size_t min_history = timeseries::FactorPanel::kDefaultMinHistory,
                                  std::optional<timeseries::Month> before = std::nullopt);

QuantileCurve empirical_quantiles(std::string factor_id, std::span<const double> history, std::span<const double> grid,
                                  std::size_t min_history = timeseries::FactorPanel::kDefaultMinHistory);

// CSV `factor_id,probability,value`.
void write_curves_csv(std::ostream& out, std::span<const QuantileCurve> curves,
                      std::span<const std::string> comment = {});

}  // namespace svar::factordist
