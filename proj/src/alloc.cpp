#include "stressvar/alloc.hpp"

#include "stressvar/errors.hpp"
#include "stressvar/parallel.hpp"
#include "stressvar/seed.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace svar::alloc {

using timeseries::FundUniverse;

void AllocationConfig::validate() const {
    if (!(select_fraction > 0.0 && select_fraction <= 1.0)) throw ConfigError("alloc.select_fraction must be in (0, 1]");
    if (!(weight_cap > 0.0 && weight_cap <= 1.0)) throw ConfigError("alloc.weight_cap must be in (0, 1]");
    if (!(leverage_cap >= 1.0)) throw ConfigError("alloc.leverage_cap must be >= 1");
    if (rebalance_months < 1) throw ConfigError("alloc.rebalance_months must be >= 1");
    if (!(risk_free_annual > -1.0)) throw ConfigError("alloc.risk_free must be > -1");
    if (select_count && *select_count < 1) throw ConfigError("selection count must be >= 1");
    if (start && end && *start > *end) throw ConfigError("allocation span is empty");
}

std::size_t selection_count(std::size_t n, double fraction) {
    if (n == 0) throw ContractError("selection from an empty pool");
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(k, 1, n);
}

namespace {

void check_risks(const RiskMap& risks) {
    for (const auto& [id, r] : risks)
        if (!(r > 0.0) || !std::isfinite(r)) throw DomainError(fmt::format("risk of '{}' is {}, must be > 0", id, r));
}

}  // namespace

std::vector<std::string> select_lowest(const RiskMap& risks, std::size_t count) {
    check_risks(risks);
    std::vector<std::pair<double, std::string>> order;
    order.reserve(risks.size());
    for (const auto& [id, r] : risks) order.emplace_back(r, id);
    std::sort(order.begin(), order.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(count, order.size()); ++i) out.push_back(order[i].second);
    return out;
}

WeightResult inverse_risk_weights(const RiskMap& selected, double cap) {
    if (selected.empty()) throw ContractError("no funds to weight");
    check_risks(selected);
    WeightResult out;
    const double n = static_cast<double>(selected.size());
    if (cap * n <= 1.0 + 1e-12) {
        out.cap_infeasible = cap * n < 1.0 - 1e-12;
        for (const auto& [id, r] : selected) out.weights[id] = 1.0 / n;
        return out;
    }
    std::vector<std::string> ids;
    std::vector<double> inv;
    for (const auto& [id, r] : selected) {
        ids.push_back(id);
        inv.push_back(1.0 / r);
    }
    std::vector<bool> capped(ids.size(), false);
    std::vector<double> w(ids.size(), 0.0);
    for (;;) {
        double free_inv = 0.0;
        std::size_t n_capped = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (capped[i]) ++n_capped;
            else free_inv += inv[i];
        }
        const double free_mass = 1.0 - static_cast<double>(n_capped) * cap;
        bool changed = false;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (capped[i]) {
                w[i] = cap;
                continue;
            }
            w[i] = free_mass * inv[i] / free_inv;
            if (w[i] > cap) {
                capped[i] = true;
                changed = true;
            }
        }
        if (!changed) break;
    }
    for (std::size_t i = 0; i < ids.size(); ++i) out.weights[ids[i]] = w[i];
    return out;
}

WeightResult weights(const RiskMap& risks, const AllocationConfig& cfg) {
    const std::size_t count =
        std::min(cfg.select_count.value_or(selection_count(risks.size(), cfg.select_fraction)), risks.size());
    RiskMap chosen;
    for (const auto& id : select_lowest(risks, count)) chosen.emplace(id, risks.at(id));
    return inverse_risk_weights(chosen, cfg.weight_cap);
}

double leverage(const RiskMap& all, const RiskMap& selected, double leverage_cap) {
    if (selected.empty() || all.empty()) throw ContractError("leverage needs a non-empty selection");
    check_risks(all);
    check_risks(selected);
    double inv_all = 0.0, inv_sel = 0.0;
    for (const auto& [id, r] : all) inv_all += 1.0 / r;
    for (const auto& [id, r] : selected) inv_sel += 1.0 / r;
    const double ratio =
        static_cast<double>(all.size()) / static_cast<double>(selected.size()) * inv_sel / inv_all;
    return std::min(leverage_cap, ratio);
}

double monthly_rate(double annual) { return std::pow(1.0 + annual, 1.0 / 12.0) - 1.0; }

PerformanceReport performance_metrics(std::span<const double> monthly, double risk_free_annual) {
    if (monthly.size() < 12) throw InsufficientHistoryError("performance metrics need 12 months");
    PerformanceReport p;
    p.monthly_returns.assign(monthly.begin(), monthly.end());
    const double n = static_cast<double>(monthly.size());

    double wealth = 1.0, peak = 1.0;
    std::size_t peak_at = 0, positive = 0;
    bool under_water = false;
    for (std::size_t t = 0; t < monthly.size(); ++t) {
        wealth *= 1.0 + monthly[t];
        if (monthly[t] > 0.0) ++positive;
        if (wealth >= peak) {
            if (under_water) p.max_time_to_recovery = std::max(p.max_time_to_recovery, t + 1 - peak_at);
            peak = wealth;
            peak_at = t + 1;
            under_water = false;
        } else {
            under_water = true;
            p.max_drawdown = std::min(p.max_drawdown, wealth / peak - 1.0);
        }
    }
    if (under_water) p.max_time_to_recovery = std::max(p.max_time_to_recovery, monthly.size() - peak_at);

    p.annual_return = std::pow(wealth, 12.0 / n) - 1.0;
    const double mean = std::accumulate(monthly.begin(), monthly.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : monthly) ss += (r - mean) * (r - mean);
    p.annual_vol = std::sqrt(ss / (n - 1.0)) * std::sqrt(12.0);
    if (p.annual_vol > 0.0) p.sharpe = (p.annual_return - risk_free_annual) / p.annual_vol;
    p.pct_positive_months = static_cast<double>(positive) / n;
    return p;
}

std::vector<Month> rebalance_dates(const FundUniverse& universe, const AllocationConfig& cfg, std::size_t window) {
    cfg.validate();
    if (universe.size() == 0) throw ContractError("empty fund universe");
    Month first = universe[0].start() + static_cast<int>(window);
    for (const auto& f : universe.funds()) first = std::min(first, f.start() + static_cast<int>(window));
    const Month start = cfg.start.value_or(first);
    const Month end = cfg.end.value_or(universe.last_date());
    if (start > end) throw ConfigError("no rebalance date inside the allocation span");
    std::vector<Month> out;
    for (Month d = start; d <= end; d = d + static_cast<int>(cfg.rebalance_months)) out.push_back(d);
    return out;
}

RiskTable::RiskTable(const FundUniverse& universe, const backtest::RiskEstimator& estimator,
                     std::span<const Month> dates, std::span<const risk::Measure> measures, std::size_t workers)
    : dates_(dates.begin(), dates.end()), window_(estimator.config().window) {
    struct Task {
        std::size_t date, fund;
    };
    std::vector<Task> tasks;
    for (std::size_t d = 0; d < dates_.size(); ++d) {
        auto& elig = eligible_[dates_[d]];
        for (std::size_t f = 0; f < universe.size(); ++f) {
            const auto& fund = universe[f];
            if (!fund.covers(dates_[d]) || fund.history_before(dates_[d], window_).size() < window_) continue;
            elig.push_back(fund.id());
            tasks.push_back({d, f});
        }
    }
    std::vector<risk::Measure> wanted;
    for (auto m : measures)
        if (m != risk::Measure::random && std::find(wanted.begin(), wanted.end(), m) == wanted.end()) wanted.push_back(m);

    std::vector<std::array<double, 3>> values(tasks.size());
    parallel_for(tasks.size(), workers, [&](std::size_t i) {
        const auto& fund = universe[tasks[i].fund];
        const Month at = dates_[tasks[i].date];
        for (auto m : wanted) values[i][static_cast<std::size_t>(m)] = *estimator.estimate(fund, at, m);
    });
    for (auto m : wanted)
        for (auto d : dates_) risks_[{m, d}];
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        for (auto m : wanted) {
            const double v = values[i][static_cast<std::size_t>(m)];
            if (v > 0.0 && std::isfinite(v))
                risks_[{m, dates_[tasks[i].date]}].emplace(universe[tasks[i].fund].id(), v);
        }
    }
}

const RiskMap& RiskTable::at(risk::Measure m, Month date) const {
    auto it = risks_.find({m, date});
    if (it == risks_.end())
        throw ContractError(fmt::format("risk table has no {} risks at {}", risk::measure_name(m), date.to_string()));
    return it->second;
}

const std::vector<std::string>& RiskTable::eligible(Month date) const {
    auto it = eligible_.find(date);
    if (it == eligible_.end()) throw ContractError(fmt::format("risk table has no date {}", date.to_string()));
    return it->second;
}

FofResult simulate_fof(const FundUniverse& universe, const RiskTable& table, const AllocationConfig& cfg,
                       std::span<const std::size_t> subset) {
    cfg.validate();
    const auto dates = table.dates();
    if (dates.empty()) throw ContractError("no rebalance dates");
    std::vector<bool> in_pool(universe.size(), subset.empty());
    for (auto i : subset) in_pool.at(i) = true;
    auto pooled = [&](const std::string& id) {
        const auto* f = universe.find(id);
        return f && in_pool[static_cast<std::size_t>(f - &universe[0])];
    };

    const Month last = cfg.end.value_or(universe.last_date());
    const double rf = monthly_rate(cfg.risk_free_annual);
    FofResult out;
    out.measure = cfg.measure;
    for (std::size_t k = 0; k < dates.size(); ++k) {
        Rebalance rb;
        rb.date = dates[k];
        if (cfg.measure == risk::Measure::random) {
            std::vector<std::string> pool;
            for (const auto& id : table.eligible(rb.date))
                if (pooled(id)) pool.push_back(id);
            if (!pool.empty()) {
                std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(rb.date.index())));
                std::shuffle(pool.begin(), pool.end(), rng);
                const std::size_t count =
                    std::min(cfg.select_count.value_or(selection_count(pool.size(), cfg.select_fraction)), pool.size());
                for (std::size_t i = 0; i < count; ++i) rb.weights[pool[i]] = 1.0 / static_cast<double>(count);
                rb.leverage = 1.0;
            }
        } else {
            RiskMap risks;
            for (const auto& [id, r] : table.at(cfg.measure, rb.date))
                if (pooled(id)) risks.emplace(id, r);
            if (!risks.empty()) {
                auto w = weights(risks, cfg);
                RiskMap chosen;
                for (const auto& [id, x] : w.weights) chosen.emplace(id, risks.at(id));
                rb.weights = std::move(w.weights);
                rb.cap_infeasible = w.cap_infeasible;
                rb.leverage = leverage(risks, chosen, cfg.leverage_cap);
            }
        }

        const Month hold_end = k + 1 < dates.size() ? std::min(dates[k + 1] - 1, last) : last;
        for (Month m = rb.date; m <= hold_end; m = m + 1) {
            double r = 0.0;
            for (const auto& [id, w] : rb.weights) r += w * universe.find(id)->at(m).value_or(0.0);
            out.months.push_back({m, (1.0 - rb.leverage) * rf + rb.leverage * r, rb.leverage});
        }
        out.rebalances.push_back(std::move(rb));
    }
    std::vector<double> monthly;
    monthly.reserve(out.months.size());
    for (const auto& m : out.months) monthly.push_back(m.monthly_return);
    out.performance = performance_metrics(monthly, cfg.risk_free_annual);
    return out;
}

FofResult simulate_fof(const FundUniverse& universe, const timeseries::FactorPanel& panel, const AllocationConfig& cfg,
                       const backtest::EstimatorConfig& estimator) {
    const backtest::RiskEstimator est(panel, estimator);
    const auto dates = rebalance_dates(universe, cfg, est.config().window);
    const std::array<risk::Measure, 1> measures{cfg.measure};
    const RiskTable table(universe, est, dates, measures);
    return simulate_fof(universe, table, cfg);
}

std::vector<double> market_returns(const FundUniverse& universe, Month first, Month last) {
    std::vector<double> out;
    for (Month m = first; m <= last; m = m + 1) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& f : universe.funds()) {
            if (auto r = f.at(m)) {
                sum += *r;
                ++n;
            }
        }
        out.push_back(n ? sum / static_cast<double>(n) : 0.0);
    }
    return out;
}

std::vector<InvestorSim> simulate_investors(const FundUniverse& universe, const RiskTable& table,
                                            const AllocationConfig& cfg, const InvestorConfig& inv) {
    cfg.validate();
    if (inv.sub_n > universe.size())
        throw ContractError(fmt::format("investor draw of {} funds from a universe of {}", inv.sub_n, universe.size()));
    if (inv.pick_n < 1 || inv.pick_n > inv.sub_n) throw ConfigError("simulate.pick_n must be in [1, sub_n]");
    if (table.dates().empty()) throw ContractError("no rebalance dates");
    const Month last = cfg.end.value_or(universe.last_date());
    const double market =
        performance_metrics(market_returns(universe, table.dates().front(), last), cfg.risk_free_annual).annual_return;
    const bool paired = cfg.measure != risk::Measure::random;

    std::vector<std::array<double, 2>> excess(inv.n_sims);
    parallel_for(inv.n_sims, inv.workers, [&](std::size_t s) {
        std::mt19937_64 rng(derive_seed(inv.seed, s));
        std::vector<std::size_t> all(universe.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        std::vector<std::size_t> draw;
        draw.reserve(inv.sub_n);
        std::sample(all.begin(), all.end(), std::back_inserter(draw), inv.sub_n, rng);

        AllocationConfig c = cfg;
        c.select_count = inv.pick_n;
        c.seed = derive_seed(inv.seed, 1'000'000 + s);
        excess[s][0] = simulate_fof(universe, table, c, draw).performance.annual_return - market;
        if (paired) {
            c.measure = risk::Measure::random;
            excess[s][1] = simulate_fof(universe, table, c, draw).performance.annual_return - market;
        }
    });

    std::vector<InvestorSim> out;
    for (std::size_t s = 0; s < inv.n_sims; ++s) {
        out.push_back({s, risk::measure_name(cfg.measure), excess[s][0]});
        if (paired) out.push_back({s, "random", excess[s][1]});
    }
    return out;
}

namespace {

void write_comment(std::ostream& out, std::span<const std::string> comment) {
    for (const auto& c : comment) out << "# " << c << '\n';
}

}  // namespace

void write_fof_csv(std::ostream& out, std::span<const FofResult> runs, std::span<const std::string> comment) {
    write_comment(out, comment);
    out << "date,measure,monthly_return,leverage\n";
    for (const auto& run : runs) {
        const auto name = risk::measure_name(run.measure);
        for (const auto& m : run.months)
            out << fmt::format("{},{},{},{}\n", m.date.to_string(), name, m.monthly_return, m.leverage);
    }
}

void write_performance_csv(std::ostream& out, std::span<const std::string> columns,
                           std::span<const PerformanceReport> reports, std::span<const std::string> comment) {
    if (columns.size() != reports.size()) throw ContractError("one performance column per report");
    write_comment(out, comment);
    out << "metric";
    for (const auto& c : columns) out << ',' << c;
    out << '\n';
    auto row = [&](const char* name, auto&& get) {
        out << name;
        for (const auto& r : reports) out << ',' << get(r);
        out << '\n';
    };
    row("sharpe", [](const PerformanceReport& r) { return r.sharpe ? fmt::format("{}", *r.sharpe) : std::string(); });
    row("annual_return", [](const PerformanceReport& r) { return fmt::format("{}", r.annual_return); });
    row("annual_vol", [](const PerformanceReport& r) { return fmt::format("{}", r.annual_vol); });
    row("max_drawdown", [](const PerformanceReport& r) { return fmt::format("{}", r.max_drawdown); });
    row("pct_positive_months", [](const PerformanceReport& r) { return fmt::format("{}", r.pct_positive_months); });
    row("max_time_to_recovery", [](const PerformanceReport& r) { return fmt::format("{}", r.max_time_to_recovery); });
}

void write_investor_csv(std::ostream& out, std::span<const InvestorSim> sims, std::span<const std::string> comment) {
    write_comment(out, comment);
    out << "sim_id,measure,excess_return\n";
    for (const auto& s : sims) out << fmt::format("{},{},{}\n", s.sim_id, s.measure, s.excess_return);
}

}  // namespace svar::alloc
