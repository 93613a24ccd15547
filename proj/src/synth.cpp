#include "stressvar/synth.hpp"

#include "stressvar/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace svar::synth {
namespace {

using Rng = std::mt19937_64;

constexpr std::uint64_t kStreamFactorBase = 1'000;
constexpr std::uint64_t kStreamPairBase = 500;
constexpr std::uint64_t kStreamCrashPick = 7;
constexpr std::uint64_t kStreamCrashShape = 9'000;
constexpr std::uint64_t kStreamFundBase = 100'000;

std::string factor_id(std::size_t i) { return fmt::format("F{:03d}", i); }
std::string fund_id(std::size_t i) { return fmt::format("HF{:04d}", i); }

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Unit-variance Student-t draws.
class TailDraw {
public:
    explicit TailDraw(double df) : dist_(df), scale_(std::sqrt((df - 2.0) / df)) {}
    double operator()(Rng& rng) { return dist_(rng) * scale_; }

private:
    std::student_t_distribution<double> dist_;
    double scale_;
};

void write_crash(std::vector<double>& x, std::size_t start, const SynthSpec& spec, Rng& rng) {
    for (std::size_t k = 0; k < spec.crash_months && start + k < x.size(); ++k)
        x[start + k] = -spec.crash_depth * uniform(rng, 0.5, 1.0);
}

double payoff_value(const TrueModel& m, double x, const SynthSpec& spec) {
    const auto& p = m.params;
    switch (m.payoff) {
        case Payoff::linear:
            return p.at("alpha") + p.at("beta") * x;
        case Payoff::short_put:
            return p.at("beta") * std::min(x, p.at("strike")) + p.at("premium");
        case Payoff::quadratic: {
            const double d = x - spec.factor_drift;
            const double v = spec.factor_vol;
            return p.at("alpha") + p.at("beta") * d + p.at("curvature") * (d * d - v * v) / v;
        }
        case Payoff::mixed:
            break;
    }
    throw ContractError("fund payoff must be concrete");
}

}  // namespace

Payoff parse_payoff(const std::string& name) {
    if (name == "linear") return Payoff::linear;
    if (name == "short_put") return Payoff::short_put;
    if (name == "quadratic") return Payoff::quadratic;
    if (name == "mixed") return Payoff::mixed;
    throw ConfigError("unknown payoff '" + name + "'");
}

std::string payoff_name(Payoff p) {
    switch (p) {
        case Payoff::linear: return "linear";
        case Payoff::short_put: return "short_put";
        case Payoff::quadratic: return "quadratic";
        case Payoff::mixed: return "mixed";
    }
    return "mixed";
}

void SynthSpec::validate() const {
    if (fund_months < 48) throw ConfigError("synth: fund_months must be >= 48");
    if (fund_months > factor_months) throw ConfigError("synth: fund_months must not exceed factor_months");
    if (!(noise_share >= 0.0 && noise_share < 1.0)) throw ConfigError("synth: noise_share must be in [0, 1)");
    if (!(tail_df > 2.0)) throw ConfigError("synth: tail_df must be > 2");
    if (n_factors == 0) throw ConfigError("synth: n_factors must be positive");
    if (2 * corr_pairs > n_factors) throw ConfigError("synth: too many correlated pairs");
    if (crash_factors + 2 * corr_pairs > n_factors) throw ConfigError("synth: too many crash factors");
    if (crash_factors > 0 && factor_months < fund_months + crash_months + 24)
        throw ConfigError("synth: no room for a crash before fund inception");
    if (final_year_crash && crash_factors == 0) throw ConfigError("synth: final_year_crash needs a crash factor");
    if (!(corr >= 0.0 && corr < 1.0)) throw ConfigError("synth: corr must be in [0, 1)");
    if (!(crisis_share >= 0.0 && crisis_share <= 1.0)) throw ConfigError("synth: crisis_share must be in [0, 1]");
    if (beta_min > beta_max || alpha_min > alpha_max || strike_min > strike_max || crisis_strike_min > crisis_strike_max)
        throw ConfigError("synth: empty parameter range");
}

timeseries::FactorPanel gen_factors(const SynthSpec& spec, std::vector<std::string>* crash_out,
                                    std::string* crisis_out) {
    spec.validate();
    const std::size_t T = spec.factor_months;
    const timeseries::Month start = spec.end - static_cast<int>(T) + 1;
    TailDraw draw(spec.tail_df);

    std::vector<std::vector<double>> common(spec.corr_pairs, std::vector<double>(T));
    for (std::size_t k = 0; k < spec.corr_pairs; ++k) {
        Rng rng(derive_seed(spec.seed, kStreamPairBase + k));
        for (auto& c : common[k]) c = draw(rng);
    }

    std::vector<std::vector<double>> x(spec.n_factors, std::vector<double>(T));
    const double w_common = std::sqrt(spec.corr);
    const double w_own = std::sqrt(1.0 - spec.corr);
    for (std::size_t f = 0; f < spec.n_factors; ++f) {
        Rng rng(derive_seed(spec.seed, kStreamFactorBase + f));
        const bool paired = f < 2 * spec.corr_pairs;
        for (std::size_t t = 0; t < T; ++t) {
            const double e = draw(rng);
            const double z = paired ? w_common * common[f / 2][t] + w_own * e : e;
            x[f][t] = std::max(-0.95, spec.factor_drift + spec.factor_vol * z);
        }
    }

    std::vector<std::size_t> candidates(spec.n_factors - 2 * spec.corr_pairs);
    std::iota(candidates.begin(), candidates.end(), 2 * spec.corr_pairs);
    Rng pick(derive_seed(spec.seed, kStreamCrashPick));
    std::shuffle(candidates.begin(), candidates.end(), pick);
    candidates.resize(spec.crash_factors);
    std::sort(candidates.begin(), candidates.end());

    const std::size_t inception = T - spec.fund_months;
    std::vector<std::string> crash_ids;
    for (std::size_t f : candidates) {
        Rng rng(derive_seed(spec.seed, kStreamCrashShape + f));
        const std::size_t lo = 12;
        const std::size_t hi = inception - spec.crash_months - 1;
        const std::size_t at = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
        write_crash(x[f], at, spec, rng);
        crash_ids.push_back(factor_id(f));
    }
    if (spec.final_year_crash) {
        const std::size_t f = candidates.front();
        Rng rng(derive_seed(spec.seed, kStreamCrashShape + 10'000 + f));
        const std::size_t months = std::min<std::size_t>(spec.crash_months, 12);
        const std::size_t at = T - 12 + std::uniform_int_distribution<std::size_t>(0, 12 - months)(rng);
        write_crash(x[f], at, spec, rng);
        if (crisis_out) *crisis_out = factor_id(f);
    }
    if (crash_out) *crash_out = crash_ids;

    std::vector<timeseries::ReturnSeries> series;
    series.reserve(spec.n_factors);
    for (std::size_t f = 0; f < spec.n_factors; ++f) series.emplace_back(factor_id(f), start, std::move(x[f]));
    return timeseries::FactorPanel(std::move(series), std::min<std::size_t>(T, timeseries::FactorPanel::kDefaultMinHistory));
}

FundSet gen_funds(const timeseries::FactorPanel& panel, const SynthSpec& spec,
                  const std::vector<std::string>& crash_factors, const std::string& crisis_factor) {
    spec.validate();
    if (panel.size() == 0) throw ContractError("gen_funds needs a non-empty factor panel");
    const timeseries::Month inception = spec.end - static_cast<int>(spec.fund_months) + 1;
    const auto n_crisis = static_cast<std::size_t>(std::llround(spec.crisis_share * static_cast<double>(spec.n_funds)));

    FundSet out;
    std::vector<timeseries::ReturnSeries> funds;
    funds.reserve(spec.n_funds);
    for (std::size_t i = 0; i < spec.n_funds; ++i) {
        Rng rng(derive_seed(spec.seed, kStreamFundBase + i));
        TrueModel m;
        const bool crisis_fund = !crisis_factor.empty() && i < n_crisis;
        if (crisis_fund) {
            m.factor_id = crisis_factor;
            m.payoff = Payoff::short_put;
        } else {
            m.factor_id = panel[std::uniform_int_distribution<std::size_t>(0, panel.size() - 1)(rng)].id();
            m.payoff = spec.payoff;
            if (m.payoff == Payoff::mixed)
                m.payoff = static_cast<Payoff>(std::uniform_int_distribution<int>(0, 2)(rng));
        }
        const double beta = uniform(rng, spec.beta_min, spec.beta_max);
        const double alpha = uniform(rng, spec.alpha_min, spec.alpha_max);
        switch (m.payoff) {
            case Payoff::linear:
                m.params = {{"alpha", alpha}, {"beta", beta}};
                break;
            case Payoff::short_put: {
                const double k = crisis_fund ? uniform(rng, spec.crisis_strike_min, spec.crisis_strike_max)
                                             : uniform(rng, spec.strike_min, spec.strike_max);
                const double strike = spec.factor_drift - k * spec.factor_vol;
                const double carry = uniform(rng, 0.004, 0.010);
                m.params = {{"beta", beta}, {"strike", strike}, {"premium", carry - beta * strike}};
                break;
            }
            case Payoff::quadratic: {
                const double curvature = uniform(rng, 0.5, 1.5) * (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
                m.params = {{"alpha", alpha}, {"beta", beta}, {"curvature", curvature}};
                break;
            }
            case Payoff::mixed:
                break;
        }
        const std::size_t fid = static_cast<std::size_t>(panel.find(m.factor_id) - &panel[0]);
        if (fid < 2 * spec.corr_pairs) m.proxies.push_back(panel[fid ^ 1u].id());
        m.pre_inception_crash = std::find(crash_factors.begin(), crash_factors.end(), m.factor_id) != crash_factors.end();

        const auto& factor = panel[fid];
        // one extra month ahead of inception feeds the smoothing lag
        const timeseries::Month first = inception - 1;
        std::vector<double> signal(spec.fund_months + 1);
        for (std::size_t t = 0; t < signal.size(); ++t) {
            const auto xv = factor.at(first + static_cast<int>(t));
            if (!xv) throw ContractError("factor history does not cover the fund window");
            signal[t] = payoff_value(m, *xv, spec);
        }
        // noise is scaled to normal times: the crisis year is left out
        const std::size_t calm = crisis_fund ? spec.fund_months - 12 : spec.fund_months;
        const double mean = std::accumulate(signal.begin() + 1, signal.begin() + 1 + calm, 0.0) / static_cast<double>(calm);
        double var = 0.0;
        for (std::size_t t = 1; t <= calm; ++t) var += (signal[t] - mean) * (signal[t] - mean);
        var /= static_cast<double>(calm - 1);
        const double noise_sd = std::sqrt(spec.noise_share / (1.0 - spec.noise_share) * var);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::vector<double> z(signal.size());
        for (std::size_t t = 0; t < z.size(); ++t) z[t] = signal[t] + noise_sd * noise(rng);

        std::vector<double> r(spec.fund_months);
        double wealth = 1.0, peak = 1.0;
        std::size_t length = r.size();
        for (std::size_t t = 0; t < r.size(); ++t) {
            r[t] = std::max(-0.95, (z[t + 1] + spec.smoothing * z[t]) / (1.0 + spec.smoothing));
            wealth *= 1.0 + r[t];
            peak = std::max(peak, wealth);
            if (spec.death_drawdown > 0.0 && wealth / peak - 1.0 < -spec.death_drawdown) {
                length = t + 1;
                break;
            }
        }
        r.resize(length);
        out.truth[fund_id(i)] = std::move(m);
        funds.emplace_back(fund_id(i), inception, std::move(r));
    }
    out.universe = timeseries::FundUniverse(std::move(funds));
    return out;
}

Universe generate(const SynthSpec& spec) {
    Universe u;
    u.panel = gen_factors(spec, &u.crash_factors, &u.crisis_factor);
    auto fs = gen_funds(u.panel, spec, u.crash_factors, u.crisis_factor);
    u.funds = std::move(fs.universe);
    u.truth = std::move(fs.truth);
    return u;
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth, const std::vector<std::string>& comment) {
    for (const auto& c : comment) out << "# " << c << '\n';
    out << "fund_id,factor_id,payoff,params,proxies,pre_inception_crash\n";
    for (const auto& [id, m] : truth) {
        std::string params, proxies;
        for (const auto& [k, v] : m.params) params += fmt::format("{}{}={}", params.empty() ? "" : ";", k, v);
        for (const auto& p : m.proxies) proxies += (proxies.empty() ? "" : ";") + p;
        out << fmt::format("{},{},{},{},{},{}\n", id, m.factor_id, payoff_name(m.payoff), params, proxies,
                           m.pre_inception_crash ? 1 : 0);
    }
}

}  // namespace svar::synth
