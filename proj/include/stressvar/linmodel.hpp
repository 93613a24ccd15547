#pragma once

// Fund-vs-factor regression: AR terms on the fund plus a lagged polynomial
// response to one factor, fitted by lightly ridged least squares.
//
// Coefficient / column layout of every design and fit:
//   [1]                     when include_intercept
//   [dY_{t-1} .. dY_{t-A}]  A = ar_order
//   [u_{t-j}^1 .. u_{t-j}^D] for j = 0 .. factor_lags, D = degree
// where u = (dX - center) / scale is the demeaned, scale-normalized factor
// return. degree == 0 denotes the pure-AR (null) model.

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svar::linmodel {

struct ModelSpec {
    int ar_order = 0;
    int factor_lags = 0;
    int degree = 1;
    bool include_intercept = true;

    static ModelSpec pure_ar(int ar_order, bool include_intercept = true) {
        return ModelSpec{ar_order, 0, 0, include_intercept};
    }

    bool has_factor() const { return degree > 0; }
    int max_lag() const { return ar_order > (has_factor() ? factor_lags : 0) ? ar_order : (has_factor() ? factor_lags : 0); }
    int factor_params() const { return has_factor() ? (factor_lags + 1) * degree : 0; }
    int n_params() const { return (include_intercept ? 1 : 0) + ar_order + factor_params(); }
    std::string to_string() const;

    auto operator<=>(const ModelSpec&) const = default;
};

// u = (x - center) / scale
struct BasisScaling {
    double center = 0.0;
    double scale = 1.0;
    double operator()(double x) const { return (x - center) / scale; }
};

struct Design {
    ModelSpec spec;
    BasisScaling scaling;
    std::size_t first_row = 0;  // index into the aligned input of the first usable row
    Eigen::VectorXd target;
    Eigen::MatrixXd regressors;  // column-major, layout as documented above
    std::size_t rows() const { return static_cast<std::size_t>(target.size()); }
};

// Builds the design for aligned fund returns y and factor returns x.
// `skip` (default spec.max_lag()) leading rows are dropped; it must be at
// least spec.max_lag(). Throws InsufficientHistoryError when fewer than
// 3·p rows remain or rows < p + 3, DegenerateInputError when x has zero
// variance and the spec has factor terms.
Design build_design(std::span<const double> y, std::span<const double> x, const ModelSpec& spec,
                    std::optional<std::size_t> skip = std::nullopt);

BasisScaling basis_scaling(std::span<const double> x);

struct FitOptions {
    // λ_r = ridge_scale · trace(XᵀX) / p; 0 gives plain OLS.
    double ridge_scale = 1e-9;
};

struct ModelFit {
    ModelSpec spec;
    BasisScaling scaling;
    std::vector<double> coefficients;
    std::vector<double> residuals;
    double r_squared = 0.0;
    double residual_std = 0.0;
    double rss = 0.0;
    double tss = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_params = 0;
    std::size_t first_row = 0;

    double intercept() const { return spec.include_intercept ? coefficients[0] : 0.0; }
    // α_{lag,power}, lag in [0, factor_lags], power in [1, degree].
    double factor_coefficient(int lag, int power) const;
};

// Least squares on an explicit design. Throws SingularFitError when the
// (ridged) normal matrix is not positive definite.
ModelFit fit(const Design& design, const FitOptions& options = {});

enum class Criterion { bic, aic };

struct SelectOptions {
    Criterion criterion = Criterion::bic;
    FitOptions fit;
};

// BIC = n·ln(RSS/n) + p·ln(n)   (AIC uses 2p)
double information_criterion(double rss, std::size_t n, std::size_t p, Criterion c);

// Default grid: ar ∈ {0,1}, lags ∈ {0,1,2}, degree ∈ {1,2,3}.
std::vector<ModelSpec> default_grid(int ar_max = 1, int lags_max = 2, int degree_max = 3);
std::vector<ModelSpec> grid_for_ar(int ar_order, int lags_max = 2, int degree_max = 3);

// Common row trim for a candidate set: the largest max_lag among them.
std::size_t common_skip(std::span<const ModelSpec> candidates);

// Picks the candidate with the smallest criterion value, every candidate
// evaluated on the same rows (common_skip). Ties: fewer parameters, then
// lower degree, then fewer lags, then lower AR order. Infeasible candidates
// (too many parameters for the sample) are ignored; if none remain throws
// InsufficientHistoryError.
ModelFit select_spec(std::span<const double> y, std::span<const double> x, std::span<const ModelSpec> candidates,
                     const SelectOptions& options = {});

// Same as select_spec but evaluates on an explicit row trim.
ModelFit select_spec(std::span<const double> y, std::span<const double> x, std::span<const ModelSpec> candidates,
                     std::size_t skip, const SelectOptions& options);

struct FTestResult {
    double f_stat = 0.0;
    double p_value = 1.0;
    int df_num = 1;
    int df_den = 1;
};

// F = (n-k)/q · (R1² - R0²)/(1 - R1²) of the full model against its pure-AR
// restriction. k counts every parameter of the full model (intercept and AR
// terms included); q counts the factor terms only.
// Throws ContractError when the fits are not on the same rows or not nested.
FTestResult f_test(const ModelFit& full, const ModelFit& restricted);

// Upper tail of F(df_num, df_den) at f.
double f_upper_tail(double f, double df_num, double df_den);

}  // namespace svar::linmodel
