#include <doctest.h>

#include "oracles.hpp"
#include "stressvar/errors.hpp"
#include "stressvar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace svar;
using namespace svar::synth;

namespace {

SynthSpec long_spec() {
    SynthSpec s;
    s.n_factors = 4;
    s.n_funds = 8;
    s.factor_months = 10000;
    s.fund_months = 9000;
    s.corr_pairs = 1;
    s.crash_factors = 0;
    return s;
}

std::vector<double> values(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("fixed seed reproduces the universe bit for bit") {
    SynthSpec s;
    s.n_funds = 30;
    const auto a = generate(s), b = generate(s);
    REQUIRE(a.panel.size() == b.panel.size());
    for (std::size_t i = 0; i < a.panel.size(); ++i) CHECK(a.panel[i] == b.panel[i]);
    for (std::size_t i = 0; i < a.funds.size(); ++i) CHECK(a.funds[i] == b.funds[i]);
    CHECK(a.crash_factors == b.crash_factors);
    std::ostringstream ga, gb;
    write_ground_truth(ga, a.truth);
    write_ground_truth(gb, b.truth);
    CHECK(ga.str() == gb.str());

    s.seed = 2;
    const auto c = generate(s);
    CHECK_FALSE(c.panel[0] == a.panel[0]);
}

TEST_CASE("generated shapes and ids") {
    SynthSpec s;
    const auto u = generate(s);
    CHECK(u.panel.size() == 50);
    CHECK(u.funds.size() == 200);
    CHECK(u.panel[0].id() == "F000");
    CHECK(u.funds[0].id() == "HF0000");
    CHECK(u.panel[0].size() == 360);
    CHECK(u.panel[0].end() == s.end);
    CHECK(u.funds[0].size() == 84);
    CHECK(u.funds[0].start() == s.end - 83);
    CHECK(u.crash_factors.size() == 10);
    CHECK(u.crisis_factor.empty());
    CHECK(u.truth.size() == 200);
    for (const auto& [id, m] : u.truth) {
        CHECK(u.panel.find(m.factor_id) != nullptr);
        CHECK(m.payoff != Payoff::mixed);
    }
}

TEST_CASE("Student-t(3) factors are fat tailed") {
    auto s = long_spec();
    s.tail_df = 3.0;
    s.corr_pairs = 0;
    const auto p = gen_factors(s);
    CHECK(oracle::excess_kurtosis(values(p[0].returns())) > 3.0);
}

TEST_CASE("paired factors have the configured correlation") {
    const auto p = gen_factors(long_spec());
    CHECK(std::abs(oracle::correlation(values(p[0].returns()), values(p[1].returns())) - 0.6) < 0.05);
    CHECK(std::abs(oracle::correlation(values(p[1].returns()), values(p[2].returns()))) < 0.05);
    CHECK(oracle::sample_sd(values(p[3].returns())) == doctest::Approx(0.04).epsilon(0.05));
}

TEST_CASE("noiseless unit-slope linear funds replicate their factor") {
    SynthSpec s;
    s.payoff = Payoff::linear;
    s.noise_share = 0.0;
    s.smoothing = 0.0;
    s.beta_min = s.beta_max = 1.0;
    s.alpha_min = s.alpha_max = 0.0;
    s.n_funds = 20;
    const auto u = generate(s);
    for (const auto& f : u.funds.funds()) {
        const auto& factor = *u.panel.find(u.truth.at(f.id()).factor_id);
        for (std::size_t t = 0; t < f.size(); ++t) CHECK(f[t] == doctest::Approx(*factor.at(f.date(t))).epsilon(1e-14));
    }
}

TEST_CASE("MA(1) smoothing sets the lag-1 autocorrelation") {
    auto s = long_spec();
    s.payoff = Payoff::linear;
    s.smoothing = 0.5;
    const auto u = generate(s);
    for (const auto& f : u.funds.funds()) CHECK(std::abs(oracle::autocorrelation(values(f.returns()), 1) - 0.4) < 0.1);
}

TEST_CASE("noise share matches the realized R² of the true model") {
    auto s = long_spec();
    s.payoff = Payoff::linear;
    s.smoothing = 0.0;
    for (double ns : {0.1, 0.3, 0.6}) {
        s.noise_share = ns;
        const auto u = generate(s);
        for (const auto& f : u.funds.funds()) {
            const auto& factor = *u.panel.find(u.truth.at(f.id()).factor_id);
            const auto x = values(factor.returns().subspan(static_cast<std::size_t>(f.start() - factor.start()), f.size()));
            const double r = oracle::correlation(values(f.returns()), x);
            CHECK(std::abs(r * r - (1.0 - ns)) < 0.1);
        }
    }
}

TEST_CASE("crash episodes sit strictly before fund inception") {
    SynthSpec s;
    s.payoff = Payoff::short_put;
    const auto u = generate(s);
    const auto inception = u.funds[0].start();
    int checked = 0, hidden = 0;
    for (const auto& id : u.crash_factors) {
        const auto& f = *u.panel.find(id);
        const auto before = f.all_before(inception);
        const auto deep = std::count_if(before.begin(), before.end(), [&](double x) { return x <= -0.5 * s.crash_depth; });
        CHECK(deep >= static_cast<std::ptrdiff_t>(s.crash_months));
    }
    for (const auto& [id, m] : u.truth) {
        if (!m.pre_inception_crash) continue;
        ++checked;
        const auto& fund = *u.funds.find(id);
        const auto& f = *u.panel.find(m.factor_id);
        const auto before = f.all_before(inception);
        const double worst_x = *std::min_element(before.begin(), before.end());
        const double true_worst = m.params.at("beta") * std::min(worst_x, m.params.at("strike")) + m.params.at("premium");
        const double seen_worst = *std::min_element(fund.returns().begin(), fund.returns().end());
        hidden += seen_worst > 0.75 * true_worst;
    }
    CHECK(checked > 10);
    // post-inception tails can still be deep for a few funds
    CHECK(hidden >= 0.8 * checked);
}

TEST_CASE("crisis universe") {
    SynthSpec s;
    s.final_year_crash = true;
    s.n_funds = 40;
    const auto u = generate(s);
    REQUIRE_FALSE(u.crisis_factor.empty());
    CHECK(u.crisis_factor == u.crash_factors.front());
    const auto& f = *u.panel.find(u.crisis_factor);
    const auto last_year = f.returns().subspan(f.size() - 12);
    CHECK(*std::min_element(last_year.begin(), last_year.end()) <= -0.5 * s.crash_depth);
    std::size_t crisis_funds = 0;
    for (const auto& [id, m] : u.truth)
        if (m.factor_id == u.crisis_factor && m.payoff == Payoff::short_put) ++crisis_funds;
    CHECK(crisis_funds >= 20);
}

TEST_CASE("death drawdown truncates funds") {
    SynthSpec s;
    s.final_year_crash = true;
    s.death_drawdown = 0.2;
    const auto u = generate(s);
    std::size_t short_lived = 0;
    for (const auto& f : u.funds.funds()) short_lived += f.size() < s.fund_months;
    CHECK(short_lived > 0);
}

TEST_CASE("spec validation and payoff names") {
    SynthSpec s;
    s.fund_months = 40;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.noise_share = 1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.tail_df = 2.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.fund_months = 400;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    for (auto p : {Payoff::linear, Payoff::short_put, Payoff::quadratic, Payoff::mixed}) CHECK(parse_payoff(payoff_name(p)) == p);
    CHECK_THROWS_AS(parse_payoff("call"), ConfigError);
}

TEST_CASE("ground truth csv") {
    SynthSpec s;
    s.n_funds = 3;
    const auto u = generate(s);
    std::ostringstream out;
    write_ground_truth(out, u.truth, {"seed=1"});
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "# seed=1");
    std::getline(in, line);
    CHECK(line == "fund_id,factor_id,payoff,params,proxies,pre_inception_crash");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);
}
