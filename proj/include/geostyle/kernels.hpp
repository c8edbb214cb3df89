#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace geostyle::kernels {

/// Table of the data-parallel inner loops used by the fitting, event and
/// clustering pipelines. `scalar()` is the reference implementation; SIMD
/// backends must agree with it within the tolerances asserted by the
/// equivalence tests (transcendentals to ~1e-14, reductions to ~1e-12
/// relative; summation order may differ).
struct Kernels {
    const char* name;

    /// s[i] = sin(omega*t[i] + phi), c[i] = cos(omega*t[i] + phi)
    void (*sincos_phase)(const double* t, std::size_t n, double omega, double phi,
                         double* s, double* c);

    /// out[i] = exp(k * (s[i] - 1)); s in [-1, 1], k >= 0
    void (*exp_surge)(const double* s, std::size_t n, double k, double* out);

    /// out[i] = (1-r)*(m_lin*t[i] + c_lin) + r*m_cyc*e[i]
    void (*trend_combine)(const double* t, const double* e, std::size_t n, double r,
                          double m_cyc, double m_lin, double c_lin, double* out);

    /// out[i] = m_lin*t[i] + c_lin + m_cyc*s[i]
    void (*affine_sin_combine)(const double* t, const double* s, std::size_t n,
                               double m_cyc, double m_lin, double c_lin, double* out);

    /// out[i] = (pred[i] - obs[i]) * w[i]
    void (*weighted_residual)(const double* pred, const double* obs, const double* w,
                              std::size_t n, double* out);

    /// sum_i ((pred[i] - obs[i]) * w[i])^2
    double (*weighted_ssr)(const double* pred, const double* obs, const double* w,
                           std::size_t n);

    /// sum_d (x[d] - mu[d])^2 * inv_var[d]
    double (*sq_mahalanobis_diag)(const double* x, const double* mu,
                                  const double* inv_var, std::size_t dim);

    /// y[d] += a * x[d]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);

    /// acc[d] += w * (x[d] - mu[d])^2
    void (*weighted_centered_sq_accum)(double w, const double* x, const double* mu,
                                       double* acc, std::size_t dim);
};

const Kernels& scalar();

bool cpu_has_avx2();

#if defined(__x86_64__) || defined(_M_X64)
/// Only valid to call when cpu_has_avx2() is true.
const Kernels& avx2();
#endif

/// Backends usable on this machine, reference first.
std::vector<const Kernels*> available();

/// The backend in use. Defaults to the fastest available; the GEOTREND_KERNELS
/// environment variable ("scalar", "avx2", "auto") overrides, as does select().
const Kernels& active();

/// Force a backend by name; "auto" restores default dispatch.
/// Throws geostyle::ContractError for unknown or unavailable names.
void select(const std::string& name);

} // namespace geostyle::kernels
