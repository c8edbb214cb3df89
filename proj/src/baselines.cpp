#include "geostyle/baselines.hpp"

#include "geostyle/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace geostyle {

namespace {

/// Least squares via complete orthogonal decomposition: rank-deficient
/// systems get the minimum-norm solution instead of exploding, which keeps
/// constant series at their fixed point. The flag reports deficiency so
/// callers can warn.
Eigen::VectorXd solve_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, bool& deficient) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
    deficient = cod.rank() < X.cols();
    Eigen::VectorXd beta = cod.solve(y);
    if (!beta.allFinite()) {
        // ridge fallback for pathological inputs
        const double lambda = 1e-6;
        Eigen::MatrixXd normal = X.transpose() * X;
        normal.diagonal().array() += lambda;
        beta = normal.ldlt().solve(X.transpose() * y);
        deficient = true;
    }
    return beta;
}

/// Design matrix of lagged values: row i predicts series值 y[p+i] from
/// [1, y[p+i-1], ..., y[p+i-p]] (VAR stacks every panel member's lags).
void build_lagged(const std::vector<std::vector<double>>& panel, int lag, std::size_t t_begin,
                  std::size_t t_end, Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
    const std::size_t m = panel.size();
    const std::size_t rows = t_end - t_begin;
    X.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m * lag + 1));
    Y.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t t = t_begin + i;
        X(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t s = 0; s < m; ++s) {
            for (int l = 1; l <= lag; ++l) {
                X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(1 + s * lag + (l - 1))) =
                    panel[s][t - static_cast<std::size_t>(l)];
            }
            Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = panel[s][t];
        }
    }
}

struct ArFit {
    Eigen::MatrixXd coef; // (m*lag+1) x m
    bool deficient = false;
};

ArFit fit_ar_order(const std::vector<std::vector<double>>& panel, int lag, std::size_t t_end) {
    Eigen::MatrixXd X, Y;
    build_lagged(panel, lag, static_cast<std::size_t>(lag), t_end, X, Y);
    ArFit fit;
    fit.coef.resize(X.cols(), Y.cols());
    for (Eigen::Index s = 0; s < Y.cols(); ++s) {
        bool deficient = false;
        fit.coef.col(s) = solve_ls(X, Y.col(s), deficient);
        fit.deficient = fit.deficient || deficient;
    }
    return fit;
}

/// Rolls an AR/VAR forward `steps` times from the history ending at t_end.
std::vector<std::vector<double>> roll_forward(const std::vector<std::vector<double>>& panel,
                                              const Eigen::MatrixXd& coef, int lag,
                                              std::size_t t_end, int steps) {
    const std::size_t m = panel.size();
    std::vector<std::vector<double>> history(m);
    for (std::size_t s = 0; s < m; ++s) {
        history[s].assign(panel[s].begin(), panel[s].begin() + static_cast<std::ptrdiff_t>(t_end));
    }
    std::vector<std::vector<double>> out(m);
    for (int step = 0; step < steps; ++step) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(m * static_cast<std::size_t>(lag) + 1));
        x[0] = 1.0;
        for (std::size_t s = 0; s < m; ++s) {
            for (int l = 1; l <= lag; ++l) {
                x[static_cast<Eigen::Index>(1 + s * static_cast<std::size_t>(lag) +
                                            static_cast<std::size_t>(l - 1))] =
                    history[s][history[s].size() - static_cast<std::size_t>(l)];
            }
        }
        const Eigen::VectorXd y = coef.transpose() * x;
        for (std::size_t s = 0; s < m; ++s) {
            history[s].push_back(y[static_cast<Eigen::Index>(s)]);
            out[s].push_back(y[static_cast<Eigen::Index>(s)]);
        }
    }
    return out;
}

double mae(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

double es_level(const std::vector<double>& series, double alpha, std::size_t t_end) {
    double level = series[0];
    for (std::size_t t = 1; t < t_end; ++t) {
        level = alpha * series[t] + (1.0 - alpha) * level;
    }
    return level;
}

} // namespace

const char* to_string(BaselineKind kind) {
    switch (kind) {
    case BaselineKind::mean: return "mean";
    case BaselineKind::last: return "last";
    case BaselineKind::AR: return "AR";
    case BaselineKind::VAR: return "VAR";
    case BaselineKind::ES: return "ES";
    }
    return "mean";
}

BaselineKind baseline_kind_from_string(const std::string& name) {
    for (BaselineKind k : {BaselineKind::mean, BaselineKind::last, BaselineKind::AR,
                           BaselineKind::VAR, BaselineKind::ES}) {
        if (name == to_string(k)) return k;
    }
    throw ParseError("unknown baseline '" + name + "'");
}

BaselineModel fit_baseline(BaselineKind kind, const std::vector<std::vector<double>>& panel,
                           const BaselineOptions& opts) {
    if (panel.empty() || panel[0].empty()) {
        throw InsufficientDataError("fit_baseline: empty panel");
    }
    const std::size_t len = panel[0].size();
    for (const auto& s : panel) {
        if (s.size() != len) throw ContractError("fit_baseline: panel series not aligned");
    }
    if (len <= static_cast<std::size_t>(opts.max_lag + 5)) {
        throw InsufficientDataError("fit_baseline: series length " + std::to_string(len) +
                                    " too short for max_lag " + std::to_string(opts.max_lag));
    }

    BaselineModel model;
    model.kind = kind;
    model.n_series = kind == BaselineKind::VAR ? panel.size() : 1;
    const std::vector<double>& primary = panel[0];

    switch (kind) {
    case BaselineKind::mean: {
        const double m = std::accumulate(primary.begin(), primary.end(), 0.0) /
                         static_cast<double>(primary.size());
        model.state = {m};
        return model;
    }
    case BaselineKind::last:
        model.state = {primary.back()};
        return model;
    case BaselineKind::ES: {
        const std::size_t holdout =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                         static_cast<double>(len) * opts.holdout_fraction)));
        const std::size_t train_end = len - holdout;
        double best_alpha = 0.05;
        double best_err = std::numeric_limits<double>::infinity();
        for (int i = 1; i <= 19; ++i) {
            const double alpha = 0.05 * i;
            const double level = es_level(primary, alpha, train_end);
            std::vector<double> pred(holdout, level);
            std::vector<double> truth(primary.begin() + static_cast<std::ptrdiff_t>(train_end),
                                      primary.end());
            const double err = mae(pred, truth);
            if (err < best_err - 1e-15) {
                best_err = err;
                best_alpha = alpha;
            }
        }
        model.smoothing = best_alpha;
        model.state = {es_level(primary, best_alpha, len)};
        return model;
    }
    case BaselineKind::AR:
    case BaselineKind::VAR: {
        std::vector<std::vector<double>> work;
        if (kind == BaselineKind::AR) {
            work.push_back(primary);
        } else {
            work = panel;
        }
        if (kind == BaselineKind::VAR && work.size() < 2) {
            throw ContractError("VAR requires a multi-series panel");
        }
        const std::size_t holdout =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                         static_cast<double>(len) * opts.holdout_fraction)));
        const std::size_t train_end = len - holdout;
        int best_lag = 1;
        double best_err = std::numeric_limits<double>::infinity();
        for (int lag = 1; lag <= opts.max_lag; ++lag) {
            if (train_end <= static_cast<std::size_t>(lag) + work.size() * static_cast<std::size_t>(lag) + 1) {
                break; // not enough rows to identify this order
            }
            const ArFit fit = fit_ar_order(work, lag, train_end);
            const auto rolled =
                roll_forward(work, fit.coef, lag, train_end, static_cast<int>(holdout));
            double err = 0.0;
            for (std::size_t s = 0; s < work.size(); ++s) {
                std::vector<double> truth(work[s].begin() + static_cast<std::ptrdiff_t>(train_end),
                                          work[s].end());
                err += mae(rolled[s], truth);
            }
            err /= static_cast<double>(work.size());
            if (err < best_err - 1e-15) {
                best_err = err;
                best_lag = lag;
            }
        }
        const ArFit fit = fit_ar_order(work, best_lag, len);
        model.lag = best_lag;
        model.ridge_fallback = fit.deficient;
        model.coefficients.assign(fit.coef.data(), fit.coef.data() + fit.coef.size());
        return model;
    }
    }
    return model;
}

std::vector<double> forecast_baseline(const BaselineModel& model,
                                      const std::vector<std::vector<double>>& panel,
                                      int horizon) {
    if (horizon < 1) throw ContractError("forecast_baseline: horizon must be >= 1");
    switch (model.kind) {
    case BaselineKind::mean:
    case BaselineKind::last:
    case BaselineKind::ES:
        return std::vector<double>(static_cast<std::size_t>(horizon), model.state.at(0));
    case BaselineKind::AR:
    case BaselineKind::VAR: {
        std::vector<std::vector<double>> work;
        if (model.kind == BaselineKind::AR) {
            work.push_back(panel.at(0));
        } else {
            work = panel;
        }
        if (work.size() != model.n_series) {
            throw ContractError("forecast_baseline: panel width does not match the model");
        }
        const auto cols = static_cast<Eigen::Index>(model.n_series);
        const auto rows =
            static_cast<Eigen::Index>(model.n_series * static_cast<std::size_t>(model.lag) + 1);
        Eigen::MatrixXd coef =
            Eigen::Map<const Eigen::MatrixXd>(model.coefficients.data(), rows, cols);
        const auto rolled = roll_forward(work, coef, model.lag, work[0].size(), horizon);
        std::vector<double> out;
        out.reserve(model.n_series * static_cast<std::size_t>(horizon));
        for (const auto& series : rolled) {
            out.insert(out.end(), series.begin(), series.end());
        }
        return out;
    }
    }
    return {};
}

} // namespace geostyle
