#include "geostyle/nls.hpp"

#include "geostyle/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace geostyle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(const Vec& v) { return v.allFinite(); }

/// Affine map between the solver's internal coordinates and user
/// coordinates. Finitely bounded components are rescaled to [0, 1] so that
/// parameters of very different magnitudes condition the trust region
/// equally; unbounded components pass through.
struct BoxScaling {
    Vec offset; // x = offset + scale .* u
    Vec scale;
    Vec u_lo;
    Vec u_hi;

    explicit BoxScaling(const Vec& lo, const Vec& hi) {
        const auto n = lo.size();
        offset.resize(n);
        scale.resize(n);
        u_lo.resize(n);
        u_hi.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::isfinite(lo[i]) && std::isfinite(hi[i])) {
                offset[i] = lo[i];
                scale[i] = hi[i] - lo[i];
                u_lo[i] = 0.0;
                u_hi[i] = 1.0;
            } else {
                offset[i] = 0.0;
                scale[i] = 1.0;
                u_lo[i] = lo[i];
                u_hi[i] = hi[i];
            }
        }
    }

    Vec to_x(const Vec& u) const { return offset + scale.cwiseProduct(u); }
    Vec to_u(const Vec& x) const { return (x - offset).cwiseQuotient(scale); }
    Vec clamp(Vec u) const {
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            u[i] = std::min(std::max(u[i], u_lo[i]), u_hi[i]);
        }
        return u;
    }
};

double projected_gradient_inf_norm(const Vec& g, const Vec& u, const Vec& lo, const Vec& hi) {
    double norm = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const bool blocked_low = u[i] <= lo[i] && g[i] > 0.0;
        const bool blocked_high = u[i] >= hi[i] && g[i] < 0.0;
        if (!blocked_low && !blocked_high) norm = std::max(norm, std::abs(g[i]));
    }
    return norm;
}

} // namespace

Mat numeric_jacobian(const ResidualFn& fn, const Vec& x, double h) {
    if (h <= 0.0) throw ContractError("numeric_jacobian: step must be positive");
    const Vec r0 = fn(x);
    Mat jac(r0.size(), x.size());
    Vec xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double step = h * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + step;
        const Vec rp = fn(xp);
        xp[j] = x[j] - step;
        const Vec rm = fn(xp);
        xp[j] = x[j];
        if (!all_finite(rp) || !all_finite(rm)) {
            throw Error("numeric_jacobian: non-finite residual perturbing column " +
                        std::to_string(j));
        }
        jac.col(j) = (rp - rm) / (2.0 * step);
    }
    return jac;
}

SolveResult solve_bounded_nls(const BoundedProblem& problem, const SolveOptions& opts) {
    const auto n = problem.x0.size();
    if (problem.lower.size() != n || problem.upper.size() != n) {
        throw ContractError("solve_bounded_nls: bound dimensions do not match x0");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(problem.lower[i] < problem.upper[i])) {
            throw ContractError("solve_bounded_nls: lower must be < upper componentwise");
        }
        if (problem.x0[i] < problem.lower[i] || problem.x0[i] > problem.upper[i]) {
            throw ContractError("solve_bounded_nls: x0 outside bounds at component " +
                                std::to_string(i));
        }
    }
    if (!problem.residual) throw ContractError("solve_bounded_nls: residual function not set");

    const BoxScaling box(problem.lower, problem.upper);

    auto residual_u = [&](const Vec& u) { return problem.residual(box.to_x(u)); };
    auto jacobian_u = [&](const Vec& u) -> Mat {
        Mat jac;
        if (problem.jacobian) {
            jac = problem.jacobian(box.to_x(u));
        } else {
            jac = numeric_jacobian(problem.residual, box.to_x(u), opts.fd_step);
        }
        // chain rule for the internal rescaling
        for (Eigen::Index j = 0; j < jac.cols(); ++j) jac.col(j) *= box.scale[j];
        return jac;
    };

    Vec u = box.clamp(box.to_u(problem.x0));
    Vec r = residual_u(u);
    if (!all_finite(r)) throw Error("solve_bounded_nls: residual non-finite at x0");
    double cost = 0.5 * r.squaredNorm();

    SolveResult result;
    result.x = box.to_x(u);
    result.cost = cost;

    Mat jac = jacobian_u(u);
    if (!jac.allFinite()) throw Error("solve_bounded_nls: Jacobian non-finite at x0");
    Mat hessian = jac.transpose() * jac;
    Vec grad = jac.transpose() * r;

    double lambda = 1e-3 * std::max(hessian.diagonal().maxCoeff(), 1e-12);
    double nu = 2.0;

    int iter = 0;
    while (iter < opts.max_iter) {
        if (projected_gradient_inf_norm(grad, u, box.u_lo, box.u_hi) < opts.gtol) {
            result.converged = true;
            result.termination = Termination::gradient_tol;
            break;
        }
        ++iter;

        Mat damped = hessian;
        for (Eigen::Index i = 0; i < n; ++i) {
            damped(i, i) += lambda * std::max(hessian(i, i), 1e-12);
        }
        const Vec delta = damped.ldlt().solve(-grad);
        const Vec u_new = box.clamp(u + delta);
        const Vec step = u_new - u;
        const double step_norm = step.norm();

        if (step_norm <= opts.xtol * (u.norm() + opts.xtol)) {
            result.converged = true;
            result.termination = Termination::step_tol;
            break;
        }

        const Vec r_new = residual_u(u_new);
        const double cost_new = all_finite(r_new) ? 0.5 * r_new.squaredNorm() : kInf;
        const double predicted = -grad.dot(step) - 0.5 * step.dot(hessian * step);

        if (cost_new < cost && predicted > 0.0) {
            const double rho = (cost - cost_new) / predicted;
            u = u_new;
            r = r_new;
            cost = cost_new;
            jac = jacobian_u(u);
            if (!jac.allFinite()) {
                // retreat to trust-region shrinking; keep the accepted point
                lambda *= nu;
                nu *= 2.0;
                result.x = box.to_x(u);
                result.cost = cost;
                continue;
            }
            hessian = jac.transpose() * jac;
            grad = jac.transpose() * r;
            lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
            nu = 2.0;
            result.x = box.to_x(u);
            result.cost = cost;
        } else {
            lambda *= nu;
            nu *= 2.0;
            if (lambda > 1e16) {
                // trust region collapsed; no further progress possible
                result.converged = true;
                result.termination = Termination::step_tol;
                break;
            }
        }
    }

    result.x = box.to_x(u);
    result.cost = cost;
    result.iterations = iter;
    if (iter >= opts.max_iter && !result.converged) {
        result.termination = Termination::max_iter;
    }
    return result;
}

const char* to_string(Termination t) {
    switch (t) {
    case Termination::gradient_tol: return "gradient-tol";
    case Termination::step_tol: return "step-tol";
    case Termination::max_iter: return "max-iter";
    }
    return "unknown";
}

} // namespace geostyle
