#pragma once

#include "geostyle/data.hpp"
#include "geostyle/nls.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace geostyle {

/// Parameters of the trend family
///   f(t) = (1-r) * (m_lin*t + c_lin) + r * m_cyc * exp(k*sin(omega*t+phi) - k)
/// t counts weeks from the first fitted week.
struct ModelParams {
    double r = 0.0;     // linear/cyclic trade-off, [0, 1]
    double m_cyc = 0.0; // amplitude and sign of cyclical surges, [-1, 1]
    double k = 0.0;     // spikiness, [0, 20]
    double omega = 0.0; // angular frequency per week
    double phi = 0.0;   // phase, canonically [0, 2*pi)
    double m_lin = 0.0; // linear slope per week
    double c_lin = 0.0; // intercept at the first fitted week
};

/// Model family members. Each kind uses a fixed subset of ModelParams:
///   linear       m_lin*t + c_lin                          (r frozen at 0)
///   sinusoid     c_lin + m_cyc*sin(omega*t + phi)
///   sin_plus_lin m_lin*t + c_lin + m_cyc*sin(omega*t + phi)
///   cyclic       m_cyc*exp(k*sin(omega*t + phi) - k)      (r frozen at 1)
///   full         the convex combination above, all seven parameters free
enum class ModelKind { linear, sinusoid, sin_plus_lin, cyclic, full };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
constexpr std::array<ModelKind, 5> kAllModelKinds = {
    ModelKind::linear, ModelKind::sinusoid, ModelKind::sin_plus_lin, ModelKind::cyclic,
    ModelKind::full};

/// Box bounds of the fit. omega's ceiling allows at most two full cycles per
/// year; phi is fitted on a widened interval and wrapped afterwards.
struct ParamBounds {
    double r_lo = 0.0, r_hi = 1.0;
    double m_cyc_lo = -1.0, m_cyc_hi = 1.0;
    double k_lo = 0.0, k_hi = 20.0;
    double omega_lo = 2.0 * 3.14159265358979323846 / 104.0;
    double omega_hi = 2.0 * 3.14159265358979323846 * 2.0 / 52.0;
    double phi_lo = -3.14159265358979323846;
    double phi_hi = 3.0 * 3.14159265358979323846;
    double m_lin_lo = -0.1, m_lin_hi = 0.1;
    double c_lin_lo = -1.0, c_lin_hi = 2.0;
};

struct FitResult {
    ModelParams params;
    ModelKind kind = ModelKind::full;
    double weighted_cost = 0.0; // sum over buckets of ((f - p_hat)/sigma)^2
    int n_weeks = 0;            // number of fitted buckets
    std::int64_t start_week = 0;
    std::int64_t last_week = 0; // not serialized; anchors forecasts
    bool converged = false;
};

/// A fit labelled with its series identity; the unit of fits.json.
struct FitRecord {
    std::string city;
    std::string signal;
    FitResult fit;
};

struct FitOptions {
    std::size_t min_weeks = 10;
    ParamBounds bounds;
    SolveOptions solver;
    /// Additional full-parameter starting points (e.g. ablation solutions
    /// mapped into the full space); used only when fitting ModelKind::full.
    std::vector<ModelParams> extra_seeds;
};

/// Model value at week-offset t.
double eval_model(const ModelParams& params, ModelKind kind, double t);

/// Vectorized model evaluation over a grid of week-offsets.
void eval_model_grid(const ModelParams& params, ModelKind kind, const double* t,
                     std::size_t n, double* out);

/// Sigma-weighted residuals of the model against a series, in bucket order.
Vec model_residuals(const ModelParams& params, ModelKind kind, const TrendSeries& series);

/// Analytic Jacobian of model_residuals. Columns follow the kind's free
/// parameters in the fixed order r, m_cyc, k, omega, phi, m_lin, c_lin
/// (restricted to the parameters the kind actually fits).
Mat model_jacobian(const ModelParams& params, ModelKind kind, const TrendSeries& series);

/// Weighted least-squares fit by multi-start bounded Levenberg-Marquardt.
/// Deterministic: identical series and options give an identical result.
/// Throws InsufficientDataError below min_weeks, FitError if every start fails.
FitResult fit_trend(const TrendSeries& series, ModelKind kind, const FitOptions& opts = {});

/// Fits every kind; the full fit's multi-start is seeded with each ablation's
/// solution so its cost never exceeds a representable ablation optimum.
std::map<ModelKind, FitResult> fit_all_kinds(const TrendSeries& series,
                                             const FitOptions& opts = {});

/// Maps an ablation solution into full-parameter warm starts. Exact for
/// linear (r=0) and cyclic (r=1). Sinusoid solutions are matched in offset
/// and amplitude at several small spikiness values, because the k->0 limit
/// is a flat ridge the solver needs to be dropped onto.
std::vector<ModelParams> map_to_full_seeds(const FitResult& fit, const TrendSeries& series);

/// Forecast horizon weeks past the last fitted week; values are clamped to
/// [0, 1] at this reporting boundary.
std::vector<std::pair<std::int64_t, double>> forecast(const FitResult& fit, int horizon);

struct ForecastMetrics {
    double mae = 0.0;
    double mape = 0.0; // percent, over entries with truth > 0
    std::size_t zero_truth_skipped = 0;
};

/// MAE and MAPE of a prediction against observed truth. Lengths must match.
ForecastMetrics forecast_metrics(const std::vector<double>& pred,
                                 const std::vector<double>& truth);

struct PhaseMatrix {
    std::vector<std::string> cities; // eligible, sorted
    Mat weeks;                       // circular phase gaps in weeks
    std::vector<std::string> excluded;
};

/// Pairwise circular phase differences (in weeks) between cities fitted on
/// the same signal. Cities whose omega is more than 20% away from the annual
/// frequency are excluded and reported. Throws AnalysisError if fewer than
/// two cities qualify.
PhaseMatrix phase_difference_matrix(const std::vector<FitRecord>& fits);

/// Fits ordered by descending spikiness k. With positive_only, restricts to
/// upward surges (m_cyc > 0) whose cyclic share is material (r >= r_floor;
/// cyclic fits always qualify). Ties break by |m_cyc| then city then signal.
std::vector<FitRecord> rank_spikiness(std::vector<FitRecord> fits, bool positive_only,
                                      double r_floor = 0.5);

std::string fit_records_to_json(const std::vector<FitRecord>& fits);
std::vector<FitRecord> fit_records_from_json(const std::string& text);

} // namespace geostyle
