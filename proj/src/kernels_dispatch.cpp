#include "geostyle/kernels.hpp"

#include "geostyle/error.hpp"

#include <atomic>
#include <cstdlib>

namespace geostyle::kernels {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
#if defined(__GNUC__) || defined(__clang__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
#else
    return false;
#endif
}

std::vector<const Kernels*> available() {
    std::vector<const Kernels*> out{&scalar()};
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_has_avx2()) out.push_back(&avx2());
#endif
    return out;
}

namespace {

const Kernels* resolve(const std::string& name) {
    if (name == "scalar") return &scalar();
#if defined(__x86_64__) || defined(_M_X64)
    if (name == "avx2") {
        if (!cpu_has_avx2()) throw ContractError("kernel backend 'avx2' not supported by this CPU");
        return &avx2();
    }
#endif
    if (name == "auto") {
#if defined(__x86_64__) || defined(_M_X64)
        if (cpu_has_avx2()) return &avx2();
#endif
        return &scalar();
    }
    throw ContractError("unknown kernel backend '" + name + "'");
}

const Kernels* initial_backend() {
    if (const char* env = std::getenv("GEOTREND_KERNELS")) {
        return resolve(env);
    }
    return resolve("auto");
}

std::atomic<const Kernels*>& slot() {
    static std::atomic<const Kernels*> current{initial_backend()};
    return current;
}

} // namespace

const Kernels& active() { return *slot().load(std::memory_order_relaxed); }

void select(const std::string& name) { slot().store(resolve(name), std::memory_order_relaxed); }

} // namespace geostyle::kernels
