#include "stressvar/scoring.hpp"

#include "stressvar/errors.hpp"
#include "stressvar/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <utility>

namespace svar::scoring {

using linmodel::ModelSpec;
using timeseries::Month;

namespace {

std::size_t row_trim(int ar_order, const ScoringConfig& cfg) {
    return static_cast<std::size_t>(std::max({ar_order, cfg.ar_max, cfg.lags_max}));
}

}  // namespace

int select_fund_ar_order(std::span<const double> fund_window, const ScoringConfig& cfg) {
    std::vector<ModelSpec> candidates;
    for (int ar = 0; ar <= cfg.ar_max; ++ar) candidates.push_back(ModelSpec::pure_ar(ar));
    try {
        return linmodel::select_spec(fund_window, fund_window, candidates, row_trim(0, cfg), cfg.select).spec.ar_order;
    } catch (const Error&) {
        return 0;
    }
}

FactorScore score_pair(std::string factor_id, std::span<const double> y, std::span<const double> x, int ar_order,
                       const ScoringConfig& cfg) {
    const std::size_t skip = row_trim(ar_order, cfg);
    FactorScore s;
    s.factor_id = std::move(factor_id);
    const auto restricted =
        linmodel::fit(linmodel::build_design(y, x, ModelSpec::pure_ar(ar_order), skip), cfg.select.fit);
    try {
        const auto candidates = linmodel::grid_for_ar(ar_order, cfg.lags_max, cfg.degree_max);
        s.fit = linmodel::select_spec(y, x, candidates, skip, cfg.select);
        s.f_result = linmodel::f_test(s.fit, restricted);
    } catch (const DegenerateInputError&) {
        s.fit = restricted;
        s.f_result = linmodel::FTestResult{};
        s.degenerate = true;
    }
    return s;
}

ScoreSet score_all(const timeseries::ReturnSeries& fund, const timeseries::FactorPanel& panel,
                   const ScoringConfig& cfg, std::optional<Month> before) {
    ScoreSet out;
    out.fund_id = fund.id();
    const Month cut = before.value_or(fund.end() + 1);
    out.fund_ar_order = select_fund_ar_order(fund.history_before(cut, cfg.window), cfg);

    struct Slot {
        std::optional<FactorScore> score;
        std::string skip_reason;
    };
    std::vector<Slot> slots(panel.size());
    parallel_for(panel.size(), cfg.workers, [&](std::size_t i) {
        const auto& factor = panel[i];
        try {
            const auto pair = timeseries::align(fund, factor, cfg.window, cut);
            slots[i].score = score_pair(factor.id(), pair.a, pair.b, out.fund_ar_order, cfg);
        } catch (const InsufficientHistoryError& e) {
            slots[i].skip_reason = e.what();
        } catch (const SingularFitError& e) {
            slots[i].skip_reason = e.what();
        }
    });
    // panel is id-sorted, so slot order is the deterministic merge order
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].score) out.scores.push_back(std::move(*slots[i].score));
        else out.skipped.push_back({panel[i].id(), std::move(slots[i].skip_reason)});
    }
    if (out.scores.empty())
        throw EmptyProfileError(fmt::format("fund '{}': no factor has {} overlapping months", fund.id(), cfg.window));
    return out;
}

double family_bound(double theta, std::size_t n) {
    if (!(theta > 0.0 && theta < 1.0) || n < 1) throw DomainError("family_bound needs 0 < theta < 1 and N >= 1");
    return -std::expm1(static_cast<double>(n) * std::log1p(-theta));
}

double adaptive_threshold(std::span<const double> p_values, const ThresholdRule& rule) {
    if (p_values.empty()) throw ContractError("adaptive_threshold needs at least one p-value");
    const double p_min = *std::min_element(p_values.begin(), p_values.end());
    return std::clamp(rule.gamma * p_min, rule.floor, rule.ceiling);
}

RiskProfile select_factors(ScoreSet scores, const ScoringConfig& cfg) {
    RiskProfile prof;
    prof.fund_id = std::move(scores.fund_id);
    prof.window = cfg.window;
    prof.fund_ar_order = scores.fund_ar_order;
    prof.n_factors_tested = scores.scores.size();
    prof.skipped = std::move(scores.skipped);
    if (scores.scores.empty()) throw EmptyProfileError("fund '" + prof.fund_id + "' has no scored factors");

    std::vector<double> pv;
    pv.reserve(scores.scores.size());
    for (const auto& s : scores.scores) pv.push_back(s.f_result.p_value);
    prof.threshold_used = adaptive_threshold(pv, cfg.threshold);

    auto& all = scores.scores;
    std::stable_sort(all.begin(), all.end(), [](const FactorScore& a, const FactorScore& b) {
        if (a.f_result.p_value != b.f_result.p_value) return a.f_result.p_value < b.f_result.p_value;
        if (a.fit.r_squared != b.fit.r_squared) return a.fit.r_squared > b.fit.r_squared;
        return a.factor_id < b.factor_id;
    });
    for (auto& s : all) {
        if (s.f_result.p_value > prof.threshold_used || prof.selected.size() >= cfg.max_selected) break;
        prof.selected.push_back(std::move(s));
    }
    if (prof.selected.empty()) {
        prof.selected.push_back(std::move(all.front()));
        prof.low_confidence = true;
    }
    return prof;
}

RiskProfile build_profile(const timeseries::ReturnSeries& fund, const timeseries::FactorPanel& panel,
                          const ScoringConfig& cfg, std::optional<Month> before) {
    return select_factors(score_all(fund, panel, cfg, before), cfg);
}

}  // namespace svar::scoring
