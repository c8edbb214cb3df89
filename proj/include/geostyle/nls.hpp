#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace geostyle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using ResidualFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&)>;

/// Box-constrained least-squares problem: minimize 0.5*||residual(x)||^2
/// subject to lower <= x <= upper. Bound entries may be +-infinity. If
/// jacobian is empty a central-difference approximation is used.
struct BoundedProblem {
    ResidualFn residual;
    JacobianFn jacobian; // optional
    Vec lower;
    Vec upper;
    Vec x0;
};

struct SolveOptions {
    double gtol = 1e-8;
    double xtol = 1e-10;
    int max_iter = 500;
    double fd_step = 1e-7; // numeric-Jacobian step when no analytic Jacobian
};

enum class Termination { gradient_tol, step_tol, max_iter };

struct SolveResult {
    Vec x;
    double cost = 0.0; // 0.5 * sum of squared residuals
    int iterations = 0;
    bool converged = false;
    Termination termination = Termination::max_iter;
};

/// Projected Levenberg-Marquardt on an internally rescaled box. Accepted
/// iterates never increase the cost and always stay inside the bounds.
/// Throws ContractError on malformed bounds/x0 and Error if the residual is
/// non-finite at x0; non-finite trial evaluations during the search shrink
/// the trust region instead of failing.
SolveResult solve_bounded_nls(const BoundedProblem& problem, const SolveOptions& opts = {});

/// Central-difference Jacobian with per-component step h*max(1, |x_i|).
/// Throws Error naming the offending column if a perturbed evaluation is
/// non-finite.
Mat numeric_jacobian(const ResidualFn& fn, const Vec& x, double h);

const char* to_string(Termination t);

} // namespace geostyle
