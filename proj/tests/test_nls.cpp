#include "geostyle/nls.hpp"

#include "geostyle/error.hpp"
#include "geostyle/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace geostyle;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("zero-residual point inside the box") {
    BoundedProblem p;
    p.residual = [](const Vec& x) { return Vec::Constant(1, x[0] - 3.0); };
    p.lower = Vec::Constant(1, 0.0);
    p.upper = Vec::Constant(1, 10.0);
    p.x0 = Vec::Constant(1, 0.0);
    const SolveResult r = solve_bounded_nls(p);
    CHECK(r.x[0] == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(r.cost == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.converged);
}

TEST_CASE("minimizer outside the box lands on the bound") {
    BoundedProblem p;
    p.residual = [](const Vec& x) { return Vec::Constant(1, x[0] - 5.0); };
    p.lower = Vec::Constant(1, 0.0);
    p.upper = Vec::Constant(1, 2.0);
    p.x0 = Vec::Constant(1, 1.0);
    const SolveResult r = solve_bounded_nls(p);
    CHECK(r.x[0] == doctest::Approx(2.0));
    CHECK(r.converged);
}

TEST_CASE("Rosenbrock as least squares, unbounded") {
    BoundedProblem p;
    p.residual = [](const Vec& x) {
        Vec r(2);
        r[0] = 1.0 - x[0];
        r[1] = 10.0 * (x[1] - x[0] * x[0]);
        return r;
    };
    p.lower = Vec::Constant(2, -kInf);
    p.upper = Vec::Constant(2, kInf);
    p.x0 = Vec(2);
    p.x0 << -1.2, 1.0;
    const SolveResult r = solve_bounded_nls(p);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.cost < 1e-12);
}

TEST_CASE("accepted cost never exceeds the starting cost and stays feasible") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = rng.uniform(-2.0, 2.0);
        const double b = rng.uniform(-2.0, 2.0);
        BoundedProblem p;
        p.residual = [a, b](const Vec& x) {
            Vec r(3);
            r[0] = std::exp(0.3 * x[0]) - a;
            r[1] = x[0] * x[1] - b;
            r[2] = 0.5 * x[1];
            return r;
        };
        p.lower = Vec(2);
        p.upper = Vec(2);
        p.lower << -1.5, -2.0;
        p.upper << 2.0, 1.0;
        p.x0 = Vec(2);
        p.x0 << rng.uniform(-1.5, 2.0), rng.uniform(-2.0, 1.0);
        const double start_cost = 0.5 * p.residual(p.x0).squaredNorm();
        const SolveResult r = solve_bounded_nls(p);
        CHECK(r.cost <= start_cost + 1e-12);
        CHECK(r.x[0] >= p.lower[0]);
        CHECK(r.x[0] <= p.upper[0]);
        CHECK(r.x[1] >= p.lower[1]);
        CHECK(r.x[1] <= p.upper[1]);
    }
}

TEST_CASE("malformed problems are rejected") {
    BoundedProblem p;
    p.residual = [](const Vec& x) { return Vec::Constant(1, x[0]); };
    p.lower = Vec::Constant(1, 1.0);
    p.upper = Vec::Constant(1, 1.0);
    p.x0 = Vec::Constant(1, 1.0);
    CHECK_THROWS_AS(solve_bounded_nls(p), ContractError);

    p.lower[0] = 0.0;
    p.upper[0] = 2.0;
    p.x0[0] = 5.0;
    CHECK_THROWS_AS(solve_bounded_nls(p), ContractError);

    p.x0[0] = 1.0;
    p.residual = [](const Vec&) { return Vec::Constant(1, std::nan("")); };
    CHECK_THROWS_AS(solve_bounded_nls(p), Error);
}

TEST_CASE("numeric_jacobian") {
    SUBCASE("quadratic") {
        const ResidualFn f = [](const Vec& x) { return Vec::Constant(1, x[0] * x[0]); };
        const Mat jac = numeric_jacobian(f, Vec::Constant(1, 3.0), 1e-6);
        CHECK(jac(0, 0) == doctest::Approx(6.0).epsilon(1e-6));
    }
    SUBCASE("affine residuals are exact") {
        const ResidualFn f = [](const Vec& x) {
            Vec r(2);
            r[0] = 2.0 * x[0] - 3.0 * x[1] + 1.0;
            r[1] = 0.5 * x[1] - 7.0;
            return r;
        };
        Vec x(2);
        x << 1.0, 2.0;
        const Mat jac = numeric_jacobian(f, x, 1e-5);
        CHECK(jac(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(jac(0, 1) == doctest::Approx(-3.0).epsilon(1e-10));
        CHECK(jac(1, 0) == doctest::Approx(0.0));
        CHECK(jac(1, 1) == doctest::Approx(0.5).epsilon(1e-10));
    }
    SUBCASE("non-finite perturbation names the column") {
        const ResidualFn f = [](const Vec& x) {
            return Vec::Constant(1, std::sqrt(x[1])); // NaN when x[1] dips negative
        };
        Vec x(2);
        x << 1.0, 0.0;
        try {
            numeric_jacobian(f, x, 1e-6);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("column 1") != std::string::npos);
        }
    }
}
