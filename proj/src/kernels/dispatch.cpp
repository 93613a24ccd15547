#include "stressvar/errors.hpp"
#include "stressvar/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace svar::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(STRESSVAR_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend initial_backend() {
    Backend b = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("STRESSVAR_KERNELS")) {
        const std::string_view v(env);
        if (v == "scalar") b = Backend::scalar;
        else if (v == "avx2" && cpu_has_avx2()) b = Backend::avx2;
    }
    return b;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> ptr{&table(initial_backend())};
    return ptr;
}

}  // namespace

bool supported(Backend b) { return b == Backend::scalar || cpu_has_avx2(); }

const KernelTable& table(Backend b) {
#if defined(STRESSVAR_HAVE_AVX2)
    if (b == Backend::avx2) return avx2_table();
#else
    (void)b;
#endif
    return scalar_table();
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

Backend active_backend() { return &active() == &scalar_table() ? Backend::scalar : Backend::avx2; }

void set_backend(Backend b) {
    if (!supported(b)) throw ConfigError("kernel backend '" + std::string(backend_name(b)) + "' is not available");
    current().store(&table(b), std::memory_order_release);
}

Backend parse_backend(std::string_view name) {
    if (name == "scalar") return Backend::scalar;
    if (name == "avx2") return Backend::avx2;
    if (name == "auto") return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    throw ConfigError("unknown kernel backend '" + std::string(name) + "'");
}

std::string_view backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

}  // namespace svar::kernels
