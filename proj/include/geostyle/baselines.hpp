#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace geostyle {

/// Reference forecasters the trend model is benchmarked against.
/// mean/last repeat a cached statistic, AR/VAR are least-squares
/// autoregressions rolled forward recursively, ES is simple exponential
/// smoothing.
enum class BaselineKind { mean, last, AR, VAR, ES };

const char* to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& name);

struct BaselineModel {
    BaselineKind kind = BaselineKind::mean;
    int lag = 0;                       // AR/VAR order
    double smoothing = 0.0;            // ES level factor
    std::vector<double> coefficients;  // AR: [intercept, a_1..a_p];
                                       // VAR: per-equation rows flattened
    std::vector<double> state;         // cached statistic / ES level / last lags
    std::size_t n_series = 1;          // VAR panel width
    bool ridge_fallback = false;       // set when rank-deficient LS was detected
};

struct BaselineOptions {
    int max_lag = 8;
    double holdout_fraction = 0.2; // validation tail for lag / alpha selection
};

/// Fits a baseline on an aligned panel (outer index = series, inner = time).
/// Single-series kinds use panel[0]. Lag and smoothing factors are selected
/// on a deterministic last-20% holdout, smallest candidate on ties.
/// Throws InsufficientDataError when the series is too short.
BaselineModel fit_baseline(BaselineKind kind, const std::vector<std::vector<double>>& panel,
                           const BaselineOptions& opts = {});

/// Recursive multi-step forecast. For VAR returns series-major order:
/// out[s*horizon + h] is series s at step h+1.
std::vector<double> forecast_baseline(const BaselineModel& model,
                                      const std::vector<std::vector<double>>& panel,
                                      int horizon);

} // namespace geostyle
