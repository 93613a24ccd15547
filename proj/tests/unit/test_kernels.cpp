#include <doctest.h>

#include "stressvar/errors.hpp"
#include "stressvar/kernels.hpp"
#include "stressvar/riskmeasures.hpp"
#include "stressvar/scoring.hpp"
#include "stressvar/synth.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace svar;
using kernels::Backend;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}); }

struct BackendGuard {
    Backend saved = kernels::active_backend();
    ~BackendGuard() { kernels::set_backend(saved); }
};

}  // namespace

TEST_CASE("scalar table is always available") {
    CHECK(kernels::supported(Backend::scalar));
    CHECK(kernels::parse_backend("scalar") == Backend::scalar);
    CHECK_THROWS_AS(kernels::parse_backend("neon"), ConfigError);
    BackendGuard guard;
    kernels::set_backend(Backend::scalar);
    CHECK(kernels::active_backend() == Backend::scalar);
    CHECK(kernels::backend_name(Backend::scalar) == "scalar");
}

TEST_CASE("scalar kernels against direct loops") {
    std::mt19937_64 rng(7);
    const auto& t = kernels::scalar_table();
    for (std::size_t n : {0, 1, 5, 36, 101}) {
        const auto a = random_vector(rng, n), b = random_vector(rng, n);
        long double s = 0, d = 0;
        for (std::size_t i = 0; i < n; ++i) s += a[i], d += static_cast<long double>(a[i]) * b[i];
        CHECK(close(t.sum(a.data(), n), static_cast<double>(s), 1e-13));
        CHECK(close(t.dot(a.data(), b.data(), n), static_cast<double>(d), 1e-13));
        double cs[3];
        t.central_sums(a.data(), n, 0.25, cs);
        long double e2 = 0, e3 = 0, e4 = 0;
        for (double x : a) {
            const long double u = x - 0.25;
            e2 += u * u, e3 += u * u * u, e4 += u * u * u * u;
        }
        CHECK(close(cs[0], static_cast<double>(e2), 1e-12));
        CHECK(close(cs[1], static_cast<double>(e3), 1e-12));
        CHECK(close(cs[2], static_cast<double>(e4), 1e-12));
    }
    const std::vector<double> coeffs{0.5, -1.0, 2.0};  // 0.5 - u + 2u², minimum 0.375 at u = 0.25
    const std::vector<double> pts{-1.0, 0.0, 0.25, 1.0};
    CHECK(t.poly_min(coeffs.data(), 3, pts.data(), 4) == doctest::Approx(0.375));
    const std::vector<double> r{-0.03, -0.01, 0.02, -0.05}, v{0.02, 0.02, 0.01, 0.02};
    CHECK(t.count_below(r.data(), v.data(), 4, 1.0) == 2);
    CHECK(t.count_below(r.data(), v.data(), 4, 2.0) == 1);
    CHECK(t.count_below(r.data(), v.data(), 4, 3.0) == 0);
}

#if defined(STRESSVAR_HAVE_AVX2)
TEST_CASE("avx2 kernels match the scalar reference") {
    if (!kernels::supported(Backend::avx2)) {
        MESSAGE("AVX2 not supported on this CPU; equivalence not exercised");
        return;
    }
    const auto& s = kernels::scalar_table();
    const auto& v = kernels::avx2_table();
    std::mt19937_64 rng(11);
    for (std::size_t n = 0; n <= 70; ++n) {
        const auto a = random_vector(rng, n, 0.05), b = random_vector(rng, n, 0.05);
        CHECK(close(s.sum(a.data(), n), v.sum(a.data(), n), 1e-13));
        CHECK(close(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n), 1e-13));
        double c1[3], c2[3];
        s.central_sums(a.data(), n, 0.001, c1);
        v.central_sums(a.data(), n, 0.001, c2);
        for (int k = 0; k < 3; ++k) CHECK(close(c1[k], c2[k], 1e-12));
        CHECK(s.count_below(a.data(), b.data(), n, 1.5) == v.count_below(a.data(), b.data(), n, 1.5));

        const std::size_t nc = 1 + n % 5;
        const auto coeffs = random_vector(rng, nc);
        const auto pts = random_vector(rng, n + 1, 2.0);
        CHECK(close(s.poly_min(coeffs.data(), nc, pts.data(), n + 1), v.poly_min(coeffs.data(), nc, pts.data(), n + 1),
                    1e-13));
    }
    for (std::size_t cols = 1; cols <= 13; ++cols) {
        for (std::size_t rows : {3, 8, 35, 37}) {
            const auto X = random_vector(rng, rows * cols);
            std::vector<double> g1(cols * cols), g2(cols * cols);
            s.gram(X.data(), rows, cols, g1.data());
            v.gram(X.data(), rows, cols, g2.data());
            for (std::size_t i = 0; i < g1.size(); ++i) CHECK(close(g1[i], g2[i], 1e-12));
            for (std::size_t i = 0; i < cols; ++i)
                for (std::size_t k = 0; k < cols; ++k) CHECK(g1[i * cols + k] == g1[k * cols + i]);
        }
    }
}

TEST_CASE("profiles and StressVaR agree across backends") {
    if (!kernels::supported(Backend::avx2)) return;
    BackendGuard guard;
    synth::SynthSpec spec;
    spec.n_factors = 12;
    spec.n_funds = 6;
    spec.corr_pairs = 2;
    spec.crash_factors = 3;
    const auto u = synth::generate(spec);
    risk::CurveMap curves;
    for (const auto& f : u.panel.factors())
        curves.emplace(f.id(), factordist::empirical_quantiles(f, factordist::standard_grid()));

    std::vector<risk::SvarResult> results[2];
    for (int pass = 0; pass < 2; ++pass) {
        kernels::set_backend(pass == 0 ? Backend::scalar : Backend::avx2);
        for (const auto& fund : u.funds.funds()) {
            const auto prof = scoring::build_profile(fund, u.panel, {});
            results[pass].push_back(risk::stress_var(prof, curves, 0.98, fund.returns()));
        }
    }
    for (std::size_t i = 0; i < results[0].size(); ++i) {
        CHECK(results[0][i].worst_factor_id == results[1][i].worst_factor_id);
        CHECK(close(results[0][i].svar, results[1][i].svar, 1e-9));
    }
}
#endif
