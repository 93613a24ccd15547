#pragma once

// Data-parallel inner loops used by the regression, moment, scan and
// exception-counting code. Each kernel has a portable scalar reference and,
// on x86-64, an AVX2/FMA variant. The variant is chosen once at runtime from
// the CPU feature bits; STRESSVAR_KERNELS=scalar|avx2|auto overrides it.

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

namespace svar::kernels {

enum class Backend { scalar, avx2 };

struct KernelTable {
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    // Sums of (x - mean)^2, ^3, ^4.
    void (*central_sums)(const double* x, std::size_t n, double mean, double* out3);
    // Upper triangle of XᵀX for a column-major block of `ncols` columns of
    // `rows` entries each; the full symmetric matrix is written to out
    // (ncols × ncols, column-major).
    void (*gram)(const double* cols, std::size_t rows, std::size_t ncols, double* out);
    // min over points of c[0] + c[1]·u + ... + c[k-1]·u^(k-1).
    double (*poly_min)(const double* coeffs, std::size_t ncoeff, const double* pts, std::size_t n);
    // Number of i with r[i] < -m·v[i].
    std::size_t (*count_below)(const double* r, const double* v, std::size_t n, double m);
};

const KernelTable& scalar_table();
#if defined(STRESSVAR_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

bool supported(Backend b);
Backend active_backend();
// Throws ConfigError when the backend is not available on this CPU/build.
void set_backend(Backend b);
Backend parse_backend(std::string_view name);  // "scalar" | "avx2" | "auto"
std::string_view backend_name(Backend b);

const KernelTable& active();
const KernelTable& table(Backend b);

inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

inline std::array<double, 3> central_sums(std::span<const double> x, double mean) {
    std::array<double, 3> out{};
    active().central_sums(x.data(), x.size(), mean, out.data());
    return out;
}

inline double poly_min(std::span<const double> coeffs, std::span<const double> pts) {
    return active().poly_min(coeffs.data(), coeffs.size(), pts.data(), pts.size());
}

inline std::size_t count_below(std::span<const double> r, std::span<const double> v, double m) {
    return active().count_below(r.data(), v.data(), r.size() < v.size() ? r.size() : v.size(), m);
}

}  // namespace svar::kernels
