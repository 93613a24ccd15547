#include "stressvar/riskmeasures.hpp"

#include "stressvar/errors.hpp"
#include "stressvar/kernels.hpp"

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>

namespace svar::risk {

Measure parse_measure(std::string_view name) {
    if (name == "gvar") return Measure::gvar;
    if (name == "cfvar") return Measure::cfvar;
    if (name == "svar") return Measure::svar;
    if (name == "random") return Measure::random;
    throw ConfigError(fmt::format("unknown measure '{}'", name));
}

std::string measure_name(Measure m) {
    switch (m) {
        case Measure::gvar: return "gvar";
        case Measure::cfvar: return "cfvar";
        case Measure::svar: return "svar";
        case Measure::random: return "random";
    }
    return "random";
}

MomentEstimates estimate_moments(std::span<const double> returns) {
    MomentEstimates m;
    m.n_obs = returns.size();
    if (returns.size() < 2) throw InsufficientHistoryError("moments need at least two returns");
    const double n = static_cast<double>(returns.size());
    m.mean = kernels::sum(returns) / n;
    const auto cs = kernels::central_sums(returns, m.mean);
    m.sigma = std::sqrt(cs[0] / (n - 1.0));
    const double m2 = cs[0] / n;
    if (returns.size() >= kMinHigherMomentObs && m2 > 0.0) {
        m.skew = (cs[1] / n) / std::pow(m2, 1.5);
        m.ex_kurtosis = (cs[2] / n) / (m2 * m2) - 3.0;
    }
    return m;
}

double gvar(const MomentEstimates& m, double z) {
    if (!std::isfinite(m.sigma)) throw DomainError("sigma is not finite");
    return z * m.sigma;
}

double cornish_fisher_multiplier(double z, double s, double k) {
    const double z2 = z * z;
    const double z3 = z2 * z;
    return z + (z2 - 1.0) * s / 6.0 + (z3 - 3.0 * z) * k / 24.0 - (2.0 * z3 - 5.0 * z) * s * s / 36.0;
}

double cfvar(const MomentEstimates& m, double z) {
    if (!m.skew || !m.ex_kurtosis) throw ContractError("Cornish-Fisher VaR needs skew and kurtosis");
    return std::max(0.0, m.sigma * cornish_fisher_multiplier(z, *m.skew, *m.ex_kurtosis));
}

std::span<const double> scan_values(const factordist::QuantileCurve& curve, double q) {
    const double pct = q * 100.0;
    if (!(q >= 0.90 - 1e-12 && q <= 0.99 + 1e-12) || std::abs(pct - std::round(pct)) > 1e-9)
        throw ContractError(fmt::format("coverage q = {} is not on the 0.90..0.99 grid", q));
    const auto& grid = factordist::standard_grid();
    if (curve.grid.size() != grid.size() || curve.values.size() != grid.size())
        throw ContractError(fmt::format("curve '{}' does not carry the standard probability grid", curve.factor_id));
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (std::abs(curve.grid[i] - grid[i]) > 1e-12)
            throw ContractError(fmt::format("curve '{}' does not carry the standard probability grid", curve.factor_id));
    const double alpha = (1.0 - q) / 2.0;
    std::size_t lo = 0;
    while (lo < grid.size() && grid[lo] < alpha - 1e-9) ++lo;
    std::size_t hi = grid.size();
    while (hi > lo && grid[hi - 1] > 1.0 - alpha + 1e-9) --hi;
    if (hi == lo) throw ContractError("no grid point inside the scan range");
    return std::span<const double>(curve.values).subspan(lo, hi - lo);
}

double stress_scan(const linmodel::ModelFit& fit, const factordist::QuantileCurve& curve, double q,
                   const ScanOptions& options) {
    const auto shocks = scan_values(curve, q);
    const auto& spec = fit.spec;

    // Collapse the lag structure into one polynomial in the shocked u.
    std::array<double, 8> poly{};
    const int degree = spec.has_factor() ? spec.degree : 0;
    if (degree + 1 > static_cast<int>(poly.size())) throw ContractError("polynomial degree too high for the scan");
    poly[0] = fit.intercept();
    const double u_zero = spec.has_factor() ? fit.scaling(0.0) : 0.0;
    for (int lag = 0; spec.has_factor() && lag <= spec.factor_lags; ++lag) {
        for (int pw = 1; pw <= degree; ++pw) {
            const double a = fit.factor_coefficient(lag, pw);
            if (lag == 0 || options.lag_shock == LagShock::sustained) poly[static_cast<std::size_t>(pw)] += a;
            else poly[0] += a * std::pow(u_zero, pw);
        }
    }

    std::vector<double> u(shocks.size());
    for (std::size_t i = 0; i < shocks.size(); ++i) u[i] = spec.has_factor() ? fit.scaling(shocks[i]) : 0.0;
    const double worst_return =
        kernels::poly_min(std::span<const double>(poly.data(), static_cast<std::size_t>(degree + 1)), u);
    return std::max(0.0, -worst_return);
}

double specific_risk_multiplier(double q) {
    const double alpha = (1.0 - q) / 2.0;
    return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha);
}

SvarResult stress_var(const scoring::RiskProfile& profile, const CurveMap& curves, double q,
                      std::span<const double> fund_returns, const ScanOptions& options) {
    SvarResult r;
    r.fund_id = profile.fund_id;
    r.q = q;
    if (profile.selected.empty()) {
        const auto m = estimate_moments(fund_returns);
        r.svar = m.skew ? cfvar(m) : gvar(m);
        r.fallback = true;
        return r;
    }
    double worst = -1.0;
    const scoring::FactorScore* worst_score = nullptr;
    for (const auto& s : profile.selected) {
        auto it = curves.find(s.factor_id);
        if (it == curves.end()) throw ContractError(fmt::format("no quantile curve for factor '{}'", s.factor_id));
        const double loss = stress_scan(s.fit, it->second, q, options);
        r.per_factor_losses[s.factor_id] = loss;
        if (loss > worst) {
            worst = loss;
            worst_score = &s;
        }
    }
    r.worst_factor_id = worst_score->factor_id;
    r.specific_risk = specific_risk_multiplier(q) * worst_score->fit.residual_std;
    r.svar = worst + r.specific_risk;
    return r;
}

}  // namespace svar::risk
