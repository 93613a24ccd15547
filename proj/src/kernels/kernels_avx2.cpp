// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "stressvar/kernels.hpp"

#include <immintrin.h>

#include <limits>

namespace svar::kernels {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmin(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d m = _mm_min_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_min_sd(m, _mm_unpackhi_pd(m, m)));
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
        a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) s += x[i];
    return s;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), a1);
    }
    for (; i + 4 <= n; i += 4) a0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), a0);
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void central_sums_avx2(const double* x, std::size_t n, double mean, double* out3) {
    const __m256d mu = _mm256_set1_pd(mean);
    __m256d s2 = _mm256_setzero_pd();
    __m256d s3 = _mm256_setzero_pd();
    __m256d s4 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), mu);
        const __m256d d2 = _mm256_mul_pd(d, d);
        s2 = _mm256_add_pd(s2, d2);
        s3 = _mm256_fmadd_pd(d2, d, s3);
        s4 = _mm256_fmadd_pd(d2, d2, s4);
    }
    double r2 = hsum(s2), r3 = hsum(s3), r4 = hsum(s4);
    for (; i < n; ++i) {
        const double d = x[i] - mean;
        const double d2 = d * d;
        r2 += d2;
        r3 += d2 * d;
        r4 += d2 * d2;
    }
    out3[0] = r2;
    out3[1] = r3;
    out3[2] = r4;
}

void gram_avx2(const double* cols, std::size_t rows, std::size_t ncols, double* out) {
    for (std::size_t j = 0; j < ncols; ++j) {
        const double* cj = cols + j * rows;
        for (std::size_t k = j; k < ncols; ++k) {
            const double v = dot_avx2(cj, cols + k * rows, rows);
            out[j + k * ncols] = v;
            out[k + j * ncols] = v;
        }
    }
}

double poly_min_avx2(const double* c, std::size_t nc, const double* pts, std::size_t n) {
    __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d u = _mm256_loadu_pd(pts + i);
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t k = nc; k-- > 0;) acc = _mm256_fmadd_pd(acc, u, _mm256_set1_pd(c[k]));
        best = _mm256_min_pd(best, acc);
    }
    double m = hmin(best);
    for (; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = nc; k-- > 0;) acc = acc * pts[i] + c[k];
        if (acc < m) m = acc;
    }
    return m;
}

std::size_t count_below_avx2(const double* r, const double* v, std::size_t n, double m) {
    const __m256d neg_m = _mm256_set1_pd(-m);
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // -(m·v) and (-m)·v are bitwise identical, so this matches the scalar count exactly.
        const __m256d thr = _mm256_mul_pd(neg_m, _mm256_loadu_pd(v + i));
        const __m256d lt = _mm256_cmp_pd(_mm256_loadu_pd(r + i), thr, _CMP_LT_OQ);
        count += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_pd(lt)));
    }
    for (; i < n; ++i) {
        if (r[i] < -(m * v[i])) ++count;
    }
    return count;
}

constexpr KernelTable kAvx2{
    &sum_avx2, &dot_avx2, &central_sums_avx2, &gram_avx2, &poly_min_avx2, &count_below_avx2,
};

}  // namespace

const KernelTable& avx2_table() { return kAvx2; }

}  // namespace svar::kernels
