#include "geostyle/kernels.hpp"

#include "geostyle/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace geostyle;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

} // namespace

TEST_CASE("every SIMD backend matches the scalar reference") {
    const auto backends = kernels::available();
    REQUIRE(!backends.empty());
    CHECK(std::string(backends.front()->name) == "scalar");

    Rng rng(42);
    // odd length exercises the tail path
    const std::size_t n = 259;
    const auto t = random_vec(rng, n, 0.0, 400.0);
    const auto obs = random_vec(rng, n, 0.0, 1.0);
    const auto w = random_vec(rng, n, 5.0, 60.0);

    const auto& ref = kernels::scalar();
    for (const auto* backend : backends) {
        CAPTURE(backend->name);
        for (int trial = 0; trial < 20; ++trial) {
            const double omega = rng.uniform(0.05, 0.25);
            const double phi = rng.uniform(0.0, 6.28318);
            const double k = rng.uniform(0.0, 20.0);

            std::vector<double> s_ref(n), c_ref(n), s_b(n), c_b(n);
            ref.sincos_phase(t.data(), n, omega, phi, s_ref.data(), c_ref.data());
            backend->sincos_phase(t.data(), n, omega, phi, s_b.data(), c_b.data());
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(std::abs(s_b[i] - s_ref[i]) < 1e-14);
                CHECK(std::abs(c_b[i] - c_ref[i]) < 1e-14);
            }

            std::vector<double> e_ref(n), e_b(n);
            ref.exp_surge(s_ref.data(), n, k, e_ref.data());
            backend->exp_surge(s_ref.data(), n, k, e_b.data());
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(e_b[i] == doctest::Approx(e_ref[i]).epsilon(1e-13));
            }

            std::vector<double> f_ref(n), f_b(n);
            ref.trend_combine(t.data(), e_ref.data(), n, 0.4, 0.3, 1e-3, 0.2, f_ref.data());
            backend->trend_combine(t.data(), e_ref.data(), n, 0.4, 0.3, 1e-3, 0.2, f_b.data());
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(f_b[i] == doctest::Approx(f_ref[i]).epsilon(1e-13));
            }

            ref.affine_sin_combine(t.data(), s_ref.data(), n, 0.25, -2e-4, 0.3, f_ref.data());
            backend->affine_sin_combine(t.data(), s_ref.data(), n, 0.25, -2e-4, 0.3, f_b.data());
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(f_b[i] == doctest::Approx(f_ref[i]).epsilon(1e-13));
            }

            std::vector<double> r_ref(n), r_b(n);
            ref.weighted_residual(f_ref.data(), obs.data(), w.data(), n, r_ref.data());
            backend->weighted_residual(f_ref.data(), obs.data(), w.data(), n, r_b.data());
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(r_b[i] == doctest::Approx(r_ref[i]).epsilon(1e-13));
            }

            const double ssr_ref = ref.weighted_ssr(f_ref.data(), obs.data(), w.data(), n);
            const double ssr_b = backend->weighted_ssr(f_ref.data(), obs.data(), w.data(), n);
            CHECK(ssr_b == doctest::Approx(ssr_ref).epsilon(1e-12));

            const double sq_ref = ref.sq_mahalanobis_diag(f_ref.data(), obs.data(), w.data(), n);
            const double sq_b =
                backend->sq_mahalanobis_diag(f_ref.data(), obs.data(), w.data(), n);
            CHECK(sq_b == doctest::Approx(sq_ref).epsilon(1e-12));

            std::vector<double> y_ref = obs, y_b = obs;
            ref.axpy(0.37, f_ref.data(), y_ref.data(), n);
            backend->axpy(0.37, f_ref.data(), y_b.data(), n);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(y_b[i] == doctest::Approx(y_ref[i]).epsilon(1e-13));
            }

            std::vector<double> acc_ref(n, 0.1), acc_b(n, 0.1);
            ref.weighted_centered_sq_accum(0.8, f_ref.data(), obs.data(), acc_ref.data(), n);
            backend->weighted_centered_sq_accum(0.8, f_ref.data(), obs.data(), acc_b.data(), n);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(acc_b[i] == doctest::Approx(acc_ref[i]).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("vector sin/cos/exp stay close to libm across the argument range") {
    for (const auto* backend : kernels::available()) {
        CAPTURE(backend->name);
        // arguments up to ~1200 rad cover any fit/forecast horizon
        const std::size_t n = 4096;
        std::vector<double> t(n), s(n), c(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = -50.0 + static_cast<double>(i) * 0.296875;
        }
        backend->sincos_phase(t.data(), n, 1.0, 0.0, s.data(), c.data());
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(s[i] - std::sin(t[i])) < 1e-14);
            CHECK(std::abs(c[i] - std::cos(t[i])) < 1e-14);
        }
        std::vector<double> sv(n), e(n);
        for (std::size_t i = 0; i < n; ++i) sv[i] = -1.0 + 2.0 * double(i) / double(n - 1);
        backend->exp_surge(sv.data(), n, 18.0, e.data());
        for (std::size_t i = 0; i < n; ++i) {
            const double expect = std::exp(18.0 * (sv[i] - 1.0));
            CHECK(e[i] == doctest::Approx(expect).epsilon(1e-13));
        }
    }
}

TEST_CASE("backend selection") {
    kernels::select("scalar");
    CHECK(std::string(kernels::active().name) == "scalar");
    kernels::select("auto");
    if (kernels::cpu_has_avx2()) {
        CHECK(std::string(kernels::active().name) == "avx2");
    }
    CHECK_THROWS(kernels::select("sse9000"));
}
