#pragma once

// Synthetic fund/factor universes with known ground truth: fat-tailed
// factors, funds with linear or option-like factor payoffs, return smoothing
// and crash episodes that pre-date fund inception.

#include "stressvar/seed.hpp"
#include "stressvar/timeseries.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace svar::synth {

enum class Payoff { linear, short_put, quadratic, mixed };

Payoff parse_payoff(const std::string& name);
std::string payoff_name(Payoff p);

struct SynthSpec {
    std::size_t n_factors = 50;
    std::size_t n_funds = 200;
    std::size_t factor_months = 360;
    std::size_t fund_months = 84;
    Payoff payoff = Payoff::mixed;
    double noise_share = 0.3;
    double smoothing = 0.2;  // MA(1) coefficient applied to fund returns
    double tail_df = 5.0;  // > 4 keeps quadratic payoffs at finite variance
    std::uint64_t seed = 1;

    timeseries::Month end = timeseries::Month(2009, 6);
    double factor_vol = 0.04;  // monthly
    double factor_drift = 0.005;
    std::size_t corr_pairs = 5;  // factors (0,1), (2,3), ... share a common driver
    double corr = 0.6;

    // Crash episodes placed strictly before fund inception.
    std::size_t crash_factors = 10;
    double crash_depth = 0.25;
    std::size_t crash_months = 6;

    // Crisis universe: one factor crashes in the final year and crisis_share
    // of the funds are short puts on it.
    bool final_year_crash = false;
    double crisis_share = 0.5;
    // Put strikes sit this many factor vols below the drift: near the money
    // for ordinary funds, out of the money for the crisis funds.
    double strike_min = 0.0, strike_max = 1.0;
    double crisis_strike_min = 0.5, crisis_strike_max = 1.5;

    double beta_min = 0.3, beta_max = 1.2;
    double alpha_min = 0.0, alpha_max = 0.006;  // monthly
    // Funds stop reporting after a drawdown beyond this (0 disables).
    double death_drawdown = 0.0;

    void validate() const;
};

struct TrueModel {
    std::string factor_id;
    Payoff payoff = Payoff::linear;
    std::map<std::string, double> params;
    std::vector<std::string> proxies;  // factors correlated with the true one
    bool pre_inception_crash = false;
};

using GroundTruth = std::map<std::string, TrueModel>;

struct Universe {
    timeseries::FactorPanel panel;
    timeseries::FundUniverse funds;
    GroundTruth truth;
    std::vector<std::string> crash_factors;
    std::string crisis_factor;  // empty unless final_year_crash
};

using svar::derive_seed;

timeseries::FactorPanel gen_factors(const SynthSpec& spec, std::vector<std::string>* crash_factors = nullptr,
                                    std::string* crisis_factor = nullptr);

struct FundSet {
    timeseries::FundUniverse universe;
    GroundTruth truth;
};

FundSet gen_funds(const timeseries::FactorPanel& panel, const SynthSpec& spec,
                  const std::vector<std::string>& crash_factors = {}, const std::string& crisis_factor = {});

Universe generate(const SynthSpec& spec);

// fund_id,factor_id,payoff,params,proxies,pre_inception_crash
void write_ground_truth(std::ostream& out, const GroundTruth& truth, const std::vector<std::string>& comment = {});

}  // namespace svar::synth
