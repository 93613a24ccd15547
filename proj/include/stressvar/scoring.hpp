#pragma once

// Per-factor scoring of a fund: one nonlinear single-factor model per factor,
// tested against the fund's pure-AR model, then thresholded and ranked.

#include "stressvar/linmodel.hpp"
#include "stressvar/timeseries.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svar::scoring {

struct ThresholdRule {
    double gamma = 100.0;
    double floor = 0.001;
    double ceiling = 0.10;
};

struct ScoringConfig {
    std::size_t window = 36;
    int ar_max = 1;
    int lags_max = 2;
    int degree_max = 3;
    linmodel::SelectOptions select;
    ThresholdRule threshold;
    std::size_t max_selected = 5;
    std::size_t workers = 1;
};

struct FactorScore {
    std::string factor_id;
    linmodel::ModelFit fit;
    linmodel::FTestResult f_result;
    bool degenerate = false;  // zero-variance input, scored p = 1
};

struct SkippedFactor {
    std::string factor_id;
    std::string reason;
};

struct ScoreSet {
    std::string fund_id;
    int fund_ar_order = 0;
    std::vector<FactorScore> scores;  // ordered by factor id
    std::vector<SkippedFactor> skipped;
};

struct RiskProfile {
    std::string fund_id;
    std::vector<FactorScore> selected;  // ascending p-value
    double threshold_used = 0.0;
    std::size_t n_factors_tested = 0;
    std::size_t window = 0;
    int fund_ar_order = 0;
    bool low_confidence = false;
    std::vector<SkippedFactor> skipped;
};

// AR order for the fund alone: BIC over AR(0..ar_max) on the fund's last
// `window` months, trimmed like the factor models.
int select_fund_ar_order(std::span<const double> fund_window, const ScoringConfig& cfg);

// Scores one aligned (fund, factor) pair with a fixed AR order.
FactorScore score_pair(std::string factor_id, std::span<const double> y, std::span<const double> x, int ar_order,
                       const ScoringConfig& cfg);

// Uses only data strictly before `before` when given. Factors with fewer
// than `window` overlapping months are skipped and recorded. Throws
// EmptyProfileError when nothing is scorable.
ScoreSet score_all(const timeseries::ReturnSeries& fund, const timeseries::FactorPanel& panel,
                   const ScoringConfig& cfg, std::optional<timeseries::Month> before = std::nullopt);

// 1 - (1 - θ)^N
double family_bound(double theta, std::size_t n);

// clamp(γ · min(p), floor, ceiling)
double adaptive_threshold(std::span<const double> p_values, const ThresholdRule& rule = {});

// Threshold, rank (p ascending, ties by higher R², then id) and truncate.
// Falls back to the single best factor with low_confidence set when none pass.
RiskProfile select_factors(ScoreSet scores, const ScoringConfig& cfg);

RiskProfile build_profile(const timeseries::ReturnSeries& fund, const timeseries::FactorPanel& panel,
                          const ScoringConfig& cfg, std::optional<timeseries::Month> before = std::nullopt);

}  // namespace svar::scoring
