#include "stressvar/kernels.hpp"

#include <limits>

namespace svar::kernels {
namespace {

double sum_scalar(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void central_sums_scalar(const double* x, std::size_t n, double mean, double* out3) {
    double s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        const double d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    out3[0] = s2;
    out3[1] = s3;
    out3[2] = s4;
}

void gram_scalar(const double* cols, std::size_t rows, std::size_t ncols, double* out) {
    for (std::size_t j = 0; j < ncols; ++j) {
        const double* cj = cols + j * rows;
        for (std::size_t k = j; k < ncols; ++k) {
            const double v = dot_scalar(cj, cols + k * rows, rows);
            out[j + k * ncols] = v;
            out[k + j * ncols] = v;
        }
    }
}

double poly_min_scalar(const double* c, std::size_t nc, const double* pts, std::size_t n) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double u = pts[i];
        double acc = 0.0;
        for (std::size_t k = nc; k-- > 0;) acc = acc * u + c[k];
        if (acc < best) best = acc;
    }
    return best;
}

std::size_t count_below_scalar(const double* r, const double* v, std::size_t n, double m) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double threshold = -(m * v[i]);
        if (r[i] < threshold) ++count;
    }
    return count;
}

constexpr KernelTable kScalar{
    &sum_scalar, &dot_scalar, &central_sums_scalar, &gram_scalar, &poly_min_scalar, &count_below_scalar,
};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace svar::kernels
