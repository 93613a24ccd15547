#include "stressvar/linmodel.hpp"

#include "stressvar/errors.hpp"
#include "stressvar/kernels.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace svar::linmodel {
namespace {

constexpr int kMaxColumns = 24;
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxColumns, kMaxColumns>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxColumns, 1>;

void check_feasible(const ModelSpec& spec, std::size_t rows) {
    const auto p = static_cast<std::size_t>(spec.n_params());
    if (p == 0) throw ContractError("model has no parameters");
    if (3 * p > rows || rows < p + 3)
        throw InsufficientHistoryError(
            fmt::format("spec {} needs {} parameters but only {} rows are usable", spec.to_string(), p, rows));
}

bool feasible(const ModelSpec& spec, std::size_t rows) {
    const auto p = static_cast<std::size_t>(spec.n_params());
    return p > 0 && 3 * p <= rows && rows >= p + 3;
}

// Column index of a term inside the superset layout used by select_spec.
struct SupersetLayout {
    bool intercept = false;
    int ar_max = 0;
    int lags_max = 0;
    int degree_max = 0;

    int ar_col(int lag) const { return (intercept ? 1 : 0) + (lag - 1); }
    int factor_col(int lag, int power) const {
        return (intercept ? 1 : 0) + ar_max + lag * degree_max + (power - 1);
    }
    int columns() const { return (intercept ? 1 : 0) + ar_max + (lags_max + 1) * degree_max; }
};

void fill_columns(std::span<const double> y, std::span<const double> x, const BasisScaling& scaling,
                  std::size_t skip, bool intercept, int ar, int lags, int degree, Eigen::MatrixXd& out) {
    const std::size_t rows = y.size() - skip;
    int col = 0;
    if (intercept) out.col(col++).setOnes();
    for (int j = 1; j <= ar; ++j, ++col)
        for (std::size_t r = 0; r < rows; ++r) out(static_cast<Eigen::Index>(r), col) = y[skip + r - j];
    if (degree > 0) {
        for (int j = 0; j <= lags; ++j) {
            for (std::size_t r = 0; r < rows; ++r) {
                const double u = scaling(x[skip + r - j]);
                double pw = 1.0;
                for (int i = 1; i <= degree; ++i) {
                    pw *= u;
                    out(static_cast<Eigen::Index>(r), col + i - 1) = pw;
                }
            }
            col += degree;
        }
    }
}

SmallMatrix gram_of(const Eigen::MatrixXd& X) {
    const auto p = static_cast<std::size_t>(X.cols());
    SmallMatrix G(X.cols(), X.cols());
    kernels::active().gram(X.data(), static_cast<std::size_t>(X.rows()), p, G.data());
    return G;
}

// Solves (G + λI)β = b; λ from ridge_scale. Throws SingularFitError.
SmallVector ridge_solve(SmallMatrix G, const SmallVector& b, double ridge_scale) {
    const auto p = G.rows();
    const double trace = G.trace();
    if (!(trace > 0.0) || !std::isfinite(trace)) throw SingularFitError("normal matrix has zero trace");
    const double lambda = ridge_scale * trace / static_cast<double>(p);
    G.diagonal().array() += lambda;
    Eigen::LLT<SmallMatrix> llt(G);
    if (llt.info() != Eigen::Success) throw SingularFitError("normal matrix is not positive definite");
    const auto diag = llt.matrixLLT().diagonal();
    const double dmax = diag.cwiseAbs().maxCoeff();
    const double dmin = diag.cwiseAbs().minCoeff();
    if (!(dmin > 1e-7 * dmax)) throw SingularFitError("regressors are rank deficient");
    return llt.solve(b);
}

}  // namespace

std::string ModelSpec::to_string() const {
    if (!has_factor()) return fmt::format("AR({}){}", ar_order, include_intercept ? "" : " no-intercept");
    return fmt::format("AR({}) lags={} degree={}{}", ar_order, factor_lags, degree,
                       include_intercept ? "" : " no-intercept");
}

double ModelFit::factor_coefficient(int lag, int power) const {
    if (!spec.has_factor() || lag < 0 || lag > spec.factor_lags || power < 1 || power > spec.degree)
        throw ContractError("factor coefficient index out of range");
    const int base = (spec.include_intercept ? 1 : 0) + spec.ar_order;
    return coefficients[static_cast<std::size_t>(base + lag * spec.degree + (power - 1))];
}

BasisScaling basis_scaling(std::span<const double> x) {
    if (x.size() < 2) throw InsufficientHistoryError("need at least two factor observations");
    const double n = static_cast<double>(x.size());
    const double mean = kernels::sum(x) / n;
    const double ss = kernels::central_sums(x, mean)[0];
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 1e-14 * std::max(1.0, std::abs(mean)))) throw DegenerateInputError("factor returns have zero variance");
    return BasisScaling{mean, sd};
}

Design build_design(std::span<const double> y, std::span<const double> x, const ModelSpec& spec,
                    std::optional<std::size_t> skip) {
    if (y.size() != x.size()) throw ContractError("fund and factor arrays are not aligned");
    if (spec.ar_order < 0 || spec.factor_lags < 0 || spec.degree < 0) throw ContractError("negative spec entry");
    const auto lag = static_cast<std::size_t>(spec.max_lag());
    const std::size_t trim = skip.value_or(lag);
    if (trim < lag) throw ContractError("row trim is smaller than the model's largest lag");
    if (y.size() <= trim) throw InsufficientHistoryError("no rows left after lag trimming");
    const std::size_t rows = y.size() - trim;
    check_feasible(spec, rows);

    Design d;
    d.spec = spec;
    d.first_row = trim;
    if (spec.has_factor()) d.scaling = basis_scaling(x);
    d.target = Eigen::Map<const Eigen::VectorXd>(y.data() + trim, static_cast<Eigen::Index>(rows));
    d.regressors.resize(static_cast<Eigen::Index>(rows), spec.n_params());
    fill_columns(y, x, d.scaling, trim, spec.include_intercept, spec.ar_order, spec.factor_lags, spec.degree,
                 d.regressors);
    return d;
}

ModelFit fit(const Design& design, const FitOptions& options) {
    const auto& X = design.regressors;
    const auto& y = design.target;
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    if (p == 0 || p > static_cast<std::size_t>(kMaxColumns)) throw ContractError("unsupported parameter count");
    if (n < p + 3) throw InsufficientHistoryError("fewer than p + 3 rows");

    const SmallMatrix G = gram_of(X);
    SmallVector b(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j)
        b(static_cast<Eigen::Index>(j)) =
            kernels::active().dot(X.col(static_cast<Eigen::Index>(j)).data(), y.data(), n);
    const SmallVector beta = ridge_solve(G, b, options.ridge_scale);

    ModelFit f;
    f.spec = design.spec;
    f.scaling = design.scaling;
    f.first_row = design.first_row;
    f.n_obs = n;
    f.n_params = p;
    f.coefficients.assign(beta.data(), beta.data() + p);
    const Eigen::VectorXd resid = y - X * beta;
    f.residuals.assign(resid.data(), resid.data() + n);

    const std::span<const double> ys(y.data(), n);
    const double mean = kernels::sum(ys) / static_cast<double>(n);
    f.tss = kernels::central_sums(ys, mean)[0];
    f.rss = kernels::dot(f.residuals, f.residuals);
    f.r_squared = f.tss > 0.0 ? std::clamp(1.0 - f.rss / f.tss, 0.0, 1.0) : 0.0;
    f.residual_std = std::sqrt(f.rss / static_cast<double>(n - p));
    return f;
}

double information_criterion(double rss, std::size_t n, std::size_t p, Criterion c) {
    const double nn = static_cast<double>(n);
    const double penalty = c == Criterion::bic ? std::log(nn) : 2.0;
    const double floor = std::numeric_limits<double>::min();
    return nn * std::log(std::max(rss, floor) / nn) + static_cast<double>(p) * penalty;
}

std::vector<ModelSpec> grid_for_ar(int ar_order, int lags_max, int degree_max) {
    std::vector<ModelSpec> out;
    for (int lags = 0; lags <= lags_max; ++lags)
        for (int deg = 1; deg <= degree_max; ++deg) out.push_back(ModelSpec{ar_order, lags, deg, true});
    return out;
}

std::vector<ModelSpec> default_grid(int ar_max, int lags_max, int degree_max) {
    std::vector<ModelSpec> out;
    for (int ar = 0; ar <= ar_max; ++ar) {
        auto g = grid_for_ar(ar, lags_max, degree_max);
        out.insert(out.end(), g.begin(), g.end());
    }
    return out;
}

std::size_t common_skip(std::span<const ModelSpec> candidates) {
    int skip = 0;
    for (const auto& c : candidates) skip = std::max(skip, c.max_lag());
    return static_cast<std::size_t>(skip);
}

ModelFit select_spec(std::span<const double> y, std::span<const double> x, std::span<const ModelSpec> candidates,
                     const SelectOptions& options) {
    return select_spec(y, x, candidates, common_skip(candidates), options);
}

ModelFit select_spec(std::span<const double> y, std::span<const double> x, std::span<const ModelSpec> candidates,
                     std::size_t skip, const SelectOptions& options) {
    if (candidates.empty()) throw ContractError("empty candidate list");
    if (y.size() != x.size()) throw ContractError("fund and factor arrays are not aligned");
    if (skip < common_skip(candidates)) throw ContractError("row trim is smaller than a candidate's largest lag");
    if (y.size() <= skip) throw InsufficientHistoryError("no rows left after lag trimming");
    const std::size_t rows = y.size() - skip;

    SupersetLayout layout;
    bool any_factor = false;
    for (const auto& c : candidates) {
        layout.intercept |= c.include_intercept;
        layout.ar_max = std::max(layout.ar_max, c.ar_order);
        if (c.has_factor()) {
            any_factor = true;
            layout.lags_max = std::max(layout.lags_max, c.factor_lags);
            layout.degree_max = std::max(layout.degree_max, c.degree);
        }
    }
    if (layout.columns() > kMaxColumns) throw ContractError("candidate grid too large");

    // Every candidate's normal matrix is a principal submatrix of the
    // superset Gram, so one pass over the data serves the whole grid.
    const BasisScaling scaling = any_factor ? basis_scaling(x) : BasisScaling{};
    Eigen::MatrixXd S(static_cast<Eigen::Index>(rows), layout.columns());
    fill_columns(y, x, scaling, skip, layout.intercept, layout.ar_max, layout.lags_max, layout.degree_max, S);
    const SmallMatrix G = gram_of(S);
    const double* yt = y.data() + skip;
    SmallVector b(layout.columns());
    for (Eigen::Index j = 0; j < layout.columns(); ++j) b(j) = kernels::active().dot(S.col(j).data(), yt, rows);
    const double yy = kernels::active().dot(yt, yt, rows);

    struct Ranked {
        double ic;
        int p, degree, lags, ar;
        bool no_intercept;
        std::size_t index;
        auto key() const { return std::tie(ic, p, degree, lags, ar, no_intercept); }
    };
    std::optional<Ranked> best;
    std::vector<int> idx;
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
        const auto& c = candidates[ci];
        if (!feasible(c, rows)) continue;
        idx.clear();
        if (c.include_intercept) idx.push_back(0);
        for (int j = 1; j <= c.ar_order; ++j) idx.push_back(layout.ar_col(j));
        if (c.has_factor())
            for (int lag = 0; lag <= c.factor_lags; ++lag)
                for (int pw = 1; pw <= c.degree; ++pw) idx.push_back(layout.factor_col(lag, pw));
        const auto p = static_cast<Eigen::Index>(idx.size());
        SmallMatrix Gs(p, p);
        SmallVector bs(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            bs(i) = b(idx[static_cast<std::size_t>(i)]);
            for (Eigen::Index k = 0; k < p; ++k) Gs(i, k) = G(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(k)]);
        }
        SmallVector beta;
        try {
            beta = ridge_solve(Gs, bs, options.fit.ridge_scale);
        } catch (const SingularFitError&) {
            continue;
        }
        const double rss = std::max(0.0, yy - 2.0 * beta.dot(bs) + beta.dot(Gs * beta));
        Ranked r{information_criterion(rss, rows, static_cast<std::size_t>(p), options.criterion),
                 static_cast<int>(p),
                 c.degree,
                 c.factor_lags,
                 c.ar_order,
                 !c.include_intercept,
                 ci};
        if (!best || r.key() < best->key()) best = r;
    }
    if (!best) throw InsufficientHistoryError(fmt::format("no feasible candidate with {} usable rows", rows));
    return fit(build_design(y, x, candidates[best->index], skip), options.fit);
}

double f_upper_tail(double f, double df_num, double df_den) {
    if (!(f > 0.0)) return 1.0;
    if (!std::isfinite(f)) return 0.0;
    const boost::math::fisher_f_distribution<double> dist(df_num, df_den);
    return std::clamp(boost::math::cdf(boost::math::complement(dist, f)), 0.0, 1.0);
}

FTestResult f_test(const ModelFit& full, const ModelFit& restricted) {
    if (full.n_obs != restricted.n_obs || full.first_row != restricted.first_row || full.tss != restricted.tss)
        throw ContractError("full and restricted fits are not on identical rows");
    if (restricted.spec.has_factor() || restricted.spec.ar_order != full.spec.ar_order ||
        restricted.spec.include_intercept != full.spec.include_intercept || !full.spec.has_factor())
        throw ContractError("restricted model is not the pure-AR restriction of the full model");

    FTestResult out;
    out.df_num = static_cast<int>(full.n_params) - static_cast<int>(restricted.n_params);
    out.df_den = static_cast<int>(full.n_obs) - static_cast<int>(full.n_params);
    if (out.df_num < 1 || out.df_den < 1) throw ContractError("F-test needs q >= 1 and n - k >= 1");

    const double gain = full.r_squared - restricted.r_squared;
    if (!(gain > 0.0)) return out;  // f = 0, p = 1
    const double unexplained = 1.0 - full.r_squared;
    if (!(unexplained > 0.0)) {
        out.f_stat = std::numeric_limits<double>::max();
        out.p_value = 0.0;
        return out;
    }
    out.f_stat = static_cast<double>(out.df_den) / out.df_num * gain / unexplained;
    out.p_value = f_upper_tail(out.f_stat, out.df_num, out.df_den);
    return out;
}

}  // namespace svar::linmodel
