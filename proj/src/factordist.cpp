#include "stressvar/factordist.hpp"

#include "stressvar/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace svar::factordist {

const std::vector<double>& standard_grid() {
    static const std::vector<double> grid = [] {
        std::vector<double> g(99);
        for (int i = 0; i < 99; ++i) g[static_cast<std::size_t>(i)] = (i + 1) / 100.0;
        return g;
    }();
    return grid;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InsufficientHistoryError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError(fmt::format("probability {} outside [0, 1]", p));
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    // exact at order statistics, and never leaves [x_lo, x_hi]
    if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
    return std::clamp(sorted[lo] + frac * (sorted[hi] - sorted[lo]), sorted[lo], sorted[hi]);
}

QuantileCurve empirical_quantiles(std::string factor_id, std::span<const double> history, std::span<const double> grid,
                                  std::size_t min_history) {
    if (history.size() < min_history)
        throw InsufficientHistoryError(fmt::format("factor '{}' has {} months of history, minimum is {}", factor_id,
                                                   history.size(), min_history));
    if (!std::is_sorted(grid.begin(), grid.end())) throw ContractError("probability grid must be ascending");
    std::vector<double> sorted(history.begin(), history.end());
    std::sort(sorted.begin(), sorted.end());
    QuantileCurve c;
    c.factor_id = std::move(factor_id);
    c.grid.assign(grid.begin(), grid.end());
    c.values.reserve(grid.size());
    for (double p : grid) c.values.push_back(quantile_sorted(sorted, p));
    c.n_history = sorted.size();
    return c;
}

QuantileCurve empirical_quantiles(const timeseries::ReturnSeries& factor, std::span<const double> grid,
                                  std::size_t min_history, std::optional<timeseries::Month> before) {
    const auto hist = before ? factor.all_before(*before) : factor.returns();
    return empirical_quantiles(factor.id(), hist, grid, min_history);
}

void write_curves_csv(std::ostream& out, std::span<const QuantileCurve> curves, std::span<const std::string> comment) {
    for (const auto& c : comment) out << "# " << c << '\n';
    out << "factor_id,probability,value\n";
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.grid.size(); ++i) out << fmt::format("{},{},{}\n", c.factor_id, c.grid[i], c.values[i]);
}

}  // namespace svar::factordist
