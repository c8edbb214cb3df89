#include "geostyle/kernels.hpp"

#include <cmath>

// Reference kernels. Plain loops over libm; every SIMD backend is
// equivalence-tested against these.

namespace geostyle::kernels {
namespace {

void sincos_phase_scalar(const double* t, std::size_t n, double omega, double phi,
                         double* s, double* c) {
    for (std::size_t i = 0; i < n; ++i) {
        const double a = omega * t[i] + phi;
        s[i] = std::sin(a);
        c[i] = std::cos(a);
    }
}

void exp_surge_scalar(const double* s, std::size_t n, double k, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(k * (s[i] - 1.0));
    }
}

void trend_combine_scalar(const double* t, const double* e, std::size_t n, double r,
                          double m_cyc, double m_lin, double c_lin, double* out) {
    const double lin_w = 1.0 - r;
    const double cyc_w = r * m_cyc;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = lin_w * (m_lin * t[i] + c_lin) + cyc_w * e[i];
    }
}

void affine_sin_combine_scalar(const double* t, const double* s, std::size_t n,
                               double m_cyc, double m_lin, double c_lin, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = m_lin * t[i] + c_lin + m_cyc * s[i];
    }
}

void weighted_residual_scalar(const double* pred, const double* obs, const double* w,
                              std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = (pred[i] - obs[i]) * w[i];
    }
}

double weighted_ssr_scalar(const double* pred, const double* obs, const double* w,
                           std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = (pred[i] - obs[i]) * w[i];
        acc += r * r;
    }
    return acc;
}

double sq_mahalanobis_diag_scalar(const double* x, const double* mu,
                                  const double* inv_var, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double diff = x[d] - mu[d];
        acc += diff * diff * inv_var[d];
    }
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void weighted_centered_sq_accum_scalar(double w, const double* x, const double* mu,
                                       double* acc, std::size_t dim) {
    for (std::size_t d = 0; d < dim; ++d) {
        const double diff = x[d] - mu[d];
        acc[d] += w * diff * diff;
    }
}

} // namespace

const Kernels& scalar() {
    static const Kernels table{
        "scalar",
        &sincos_phase_scalar,
        &exp_surge_scalar,
        &trend_combine_scalar,
        &affine_sin_combine_scalar,
        &weighted_residual_scalar,
        &weighted_ssr_scalar,
        &sq_mahalanobis_diag_scalar,
        &axpy_scalar,
        &weighted_centered_sq_accum_scalar,
    };
    return table;
}

} // namespace geostyle::kernels
