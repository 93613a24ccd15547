#pragma once

// Gaussian VaR, Cornish-Fisher VaR and StressVaR. All three are reported as
// positive loss fractions.

#include "stressvar/factordist.hpp"
#include "stressvar/linmodel.hpp"
#include "stressvar/scoring.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace svar::risk {

// Gaussian 99th percentile in units of σ, as used by the baseline measures.
inline constexpr double kDefaultZ = 2.33;
inline constexpr std::size_t kMinHigherMomentObs = 12;

// `random` is only meaningful to the allocation study.
enum class Measure { gvar, cfvar, svar, random };

Measure parse_measure(std::string_view name);
std::string measure_name(Measure m);

struct MomentEstimates {
    double mean = 0.0;
    double sigma = 0.0;                 // sample std, denominator n - 1
    std::optional<double> skew;         // m3 / m2^1.5
    std::optional<double> ex_kurtosis;  // m4 / m2^2 - 3
    std::size_t n_obs = 0;
};

// Skew and kurtosis are populated only from kMinHigherMomentObs observations
// and a non-zero spread.
MomentEstimates estimate_moments(std::span<const double> returns);

double gvar(const MomentEstimates& m, double z = kDefaultZ);

// z + (z²-1)s/6 + (z³-3z)k/24 - (2z³-5z)s²/36
double cornish_fisher_multiplier(double z, double skew, double ex_kurtosis);

// σ times the Cornish-Fisher multiplier, floored at 0. ContractError when
// skew/kurtosis are not populated.
double cfvar(const MomentEstimates& m, double z = kDefaultZ);

enum class LagShock {
    sustained,  // every lagged factor term receives the shocked value
    zero,       // lagged factor terms see a zero factor return
};

struct ScanOptions {
    LagShock lag_shock = LagShock::sustained;
};

// Curve values at the grid points inside [(1-q)/2, 1-(1-q)/2]. q must lie on
// the 0.01 lattice within [0.90, 0.99] and the curve must carry the standard
// grid; otherwise ContractError.
std::span<const double> scan_values(const factordist::QuantileCurve& curve, double q);

// Largest loss predicted by the fitted factor response over the scanned
// quantile range: max(0, -min predicted return). AR terms are set to zero,
// the intercept is kept.
double stress_scan(const linmodel::ModelFit& fit, const factordist::QuantileCurve& curve, double q,
                   const ScanOptions& options = {});

struct SvarResult {
    std::string fund_id;
    double svar = 0.0;
    std::string worst_factor_id;
    std::map<std::string, double> per_factor_losses;
    double specific_risk = 0.0;
    double q = 0.98;
    bool fallback = false;  // empty profile: Cornish-Fisher VaR of the fund returns
};

using CurveMap = std::map<std::string, factordist::QuantileCurve, std::less<>>;

// Gaussian quantile used for the specific-risk add-on: Φ⁻¹(1 - (1-q)/2).
double specific_risk_multiplier(double q);

// max over selected factors of stress_scan plus z·σ_resid of the worst
// factor's fit. `fund_returns` is only used for the empty-profile fallback.
SvarResult stress_var(const scoring::RiskProfile& profile, const CurveMap& curves, double q,
                      std::span<const double> fund_returns = {}, const ScanOptions& options = {});

}  // namespace svar::risk
