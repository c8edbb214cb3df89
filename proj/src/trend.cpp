#include "geostyle/trend.hpp"

#include "geostyle/error.hpp"
#include "geostyle/kernels.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

using json = nlohmann::json;

namespace geostyle {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kOmegaAnnual = kTwoPi / 52.0;

// full-space parameter vector layout
enum ParamIdx { P_R = 0, P_MCYC, P_K, P_OMEGA, P_PHI, P_MLIN, P_CLIN, P_COUNT };

const std::vector<int>& active_indices(ModelKind kind) {
    static const std::vector<int> linear{P_MLIN, P_CLIN};
    static const std::vector<int> sinusoid{P_MCYC, P_OMEGA, P_PHI, P_CLIN};
    static const std::vector<int> sin_plus_lin{P_MCYC, P_OMEGA, P_PHI, P_MLIN, P_CLIN};
    static const std::vector<int> cyclic{P_MCYC, P_K, P_OMEGA, P_PHI};
    static const std::vector<int> full{P_R, P_MCYC, P_K, P_OMEGA, P_PHI, P_MLIN, P_CLIN};
    switch (kind) {
    case ModelKind::linear: return linear;
    case ModelKind::sinusoid: return sinusoid;
    case ModelKind::sin_plus_lin: return sin_plus_lin;
    case ModelKind::cyclic: return cyclic;
    case ModelKind::full: return full;
    }
    return full;
}

std::array<double, P_COUNT> to_array(const ModelParams& p) {
    return {p.r, p.m_cyc, p.k, p.omega, p.phi, p.m_lin, p.c_lin};
}

ModelParams from_array(const std::array<double, P_COUNT>& a) {
    ModelParams p;
    p.r = a[P_R];
    p.m_cyc = a[P_MCYC];
    p.k = a[P_K];
    p.omega = a[P_OMEGA];
    p.phi = a[P_PHI];
    p.m_lin = a[P_MLIN];
    p.c_lin = a[P_CLIN];
    return p;
}

std::array<double, P_COUNT> bounds_lo(const ParamBounds& b) {
    return {b.r_lo, b.m_cyc_lo, b.k_lo, b.omega_lo, b.phi_lo, b.m_lin_lo, b.c_lin_lo};
}

std::array<double, P_COUNT> bounds_hi(const ParamBounds& b) {
    return {b.r_hi, b.m_cyc_hi, b.k_hi, b.omega_hi, b.phi_hi, b.m_lin_hi, b.c_lin_hi};
}

/// The weekly grid extracted from a series, plus scratch space shared by the
/// residual and Jacobian evaluations of one solve.
struct Design {
    std::vector<double> t; // week offsets from start_week
    std::vector<double> y; // observed p_hat
    std::vector<double> w; // 1/sigma
    std::int64_t start_week = 0;
    std::int64_t last_week = 0;

    mutable std::vector<double> sin_v, cos_v, exp_v, f_v;

    explicit Design(const TrendSeries& series) {
        const std::size_t n = series.buckets.size();
        t.reserve(n);
        y.reserve(n);
        w.reserve(n);
        start_week = series.buckets.front().week;
        last_week = series.buckets.back().week;
        for (const auto& b : series.buckets) {
            t.push_back(static_cast<double>(b.week - start_week));
            y.push_back(b.p_hat);
            w.push_back(1.0 / b.sigma);
        }
        sin_v.resize(n);
        cos_v.resize(n);
        exp_v.resize(n);
        f_v.resize(n);
    }

    std::size_t size() const { return t.size(); }
};

void eval_grid_impl(const ModelParams& p, ModelKind kind, const double* t, std::size_t n,
                    double* s, double* c, double* e, double* out) {
    const auto& k = kernels::active();
    switch (kind) {
    case ModelKind::linear:
        for (std::size_t i = 0; i < n; ++i) out[i] = p.m_lin * t[i] + p.c_lin;
        return;
    case ModelKind::sinusoid:
        k.sincos_phase(t, n, p.omega, p.phi, s, c);
        k.affine_sin_combine(t, s, n, p.m_cyc, 0.0, p.c_lin, out);
        return;
    case ModelKind::sin_plus_lin:
        k.sincos_phase(t, n, p.omega, p.phi, s, c);
        k.affine_sin_combine(t, s, n, p.m_cyc, p.m_lin, p.c_lin, out);
        return;
    case ModelKind::cyclic:
        k.sincos_phase(t, n, p.omega, p.phi, s, c);
        k.exp_surge(s, n, p.k, e);
        k.trend_combine(t, e, n, 1.0, p.m_cyc, 0.0, 0.0, out);
        return;
    case ModelKind::full:
        k.sincos_phase(t, n, p.omega, p.phi, s, c);
        k.exp_surge(s, n, p.k, e);
        k.trend_combine(t, e, n, p.r, p.m_cyc, p.m_lin, p.c_lin, out);
        return;
    }
}

/// Rows are weighted by w; columns follow active_indices(kind). t_ref shifts
/// the time origin of the omega derivative: the fit parametrizes phase at
/// the window center, where omega and phi are nearly orthogonal.
void jacobian_impl(const ModelParams& p, ModelKind kind, const Design& d, double t_ref,
                   Mat& jac) {
    const std::size_t n = d.size();
    const auto& cols = active_indices(kind);
    jac.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    const double* t = d.t.data();
    const double* s = d.sin_v.data();
    const double* c = d.cos_v.data();
    const double* e = d.exp_v.data();
    const double* w = d.w.data();
    for (std::size_t j = 0; j < cols.size(); ++j) {
        double* col = jac.col(static_cast<Eigen::Index>(j)).data();
        switch (cols[j]) {
        case P_R:
            for (std::size_t i = 0; i < n; ++i) {
                col[i] = w[i] * (p.m_cyc * e[i] - (p.m_lin * t[i] + p.c_lin));
            }
            break;
        case P_MCYC:
            if (kind == ModelKind::sinusoid || kind == ModelKind::sin_plus_lin) {
                for (std::size_t i = 0; i < n; ++i) col[i] = w[i] * s[i];
            } else {
                const double r = kind == ModelKind::cyclic ? 1.0 : p.r;
                for (std::size_t i = 0; i < n; ++i) col[i] = w[i] * r * e[i];
            }
            break;
        case P_K: {
            const double rm = (kind == ModelKind::cyclic ? 1.0 : p.r) * p.m_cyc;
            for (std::size_t i = 0; i < n; ++i) col[i] = w[i] * rm * e[i] * (s[i] - 1.0);
            break;
        }
        case P_OMEGA:
            if (kind == ModelKind::sinusoid || kind == ModelKind::sin_plus_lin) {
                for (std::size_t i = 0; i < n; ++i) {
                    col[i] = w[i] * p.m_cyc * c[i] * (t[i] - t_ref);
                }
            } else {
                const double rmk = (kind == ModelKind::cyclic ? 1.0 : p.r) * p.m_cyc * p.k;
                for (std::size_t i = 0; i < n; ++i) {
                    col[i] = w[i] * rmk * e[i] * c[i] * (t[i] - t_ref);
                }
            }
            break;
        case P_PHI:
            if (kind == ModelKind::sinusoid || kind == ModelKind::sin_plus_lin) {
                for (std::size_t i = 0; i < n; ++i) col[i] = w[i] * p.m_cyc * c[i];
            } else {
                const double rmk = (kind == ModelKind::cyclic ? 1.0 : p.r) * p.m_cyc * p.k;
                for (std::size_t i = 0; i < n; ++i) col[i] = w[i] * rmk * e[i] * c[i];
            }
            break;
        case P_MLIN: {
            const double lw = kind == ModelKind::full ? 1.0 - p.r : 1.0;
            for (std::size_t i = 0; i < n; ++i) col[i] = w[i] * lw * t[i];
            break;
        }
        case P_CLIN: {
            const double lw = kind == ModelKind::full ? 1.0 - p.r : 1.0;
            for (std::size_t i = 0; i < n; ++i) col[i] = w[i] * lw;
            break;
        }
        default: break;
        }
    }
}

ModelParams unpack(const Vec& x, ModelKind kind, const ModelParams& frozen) {
    auto arr = to_array(frozen);
    const auto& cols = active_indices(kind);
    for (std::size_t j = 0; j < cols.size(); ++j) arr[cols[j]] = x[static_cast<Eigen::Index>(j)];
    return from_array(arr);
}

Vec pack(const ModelParams& p, ModelKind kind) {
    const auto arr = to_array(p);
    const auto& cols = active_indices(kind);
    Vec x(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) x[static_cast<Eigen::Index>(j)] = arr[cols[j]];
    return x;
}

/// Frozen values for parameters a kind does not fit.
ModelParams frozen_defaults(ModelKind kind) {
    ModelParams p;
    p.omega = kOmegaAnnual;
    switch (kind) {
    case ModelKind::linear:
        p.r = 0.0;
        break;
    case ModelKind::sinusoid:
    case ModelKind::sin_plus_lin:
        p.r = 1.0; // unused by the sinusoid forms
        break;
    case ModelKind::cyclic:
    case ModelKind::full:
        p.r = 1.0;
        break;
    }
    return p;
}

struct SeriesSummary {
    double slope = 0.0;     // weighted linear fit
    double intercept = 0.0; // at t = 0
    double amplitude = 0.0; // (max - min)/2, signed by skew
    double mean = 0.0;
};

SeriesSummary summarize(const Design& d) {
    SeriesSummary s;
    const std::size_t n = d.size();
    double sw = 0, swt = 0, swtt = 0, swy = 0, swty = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = d.w[i] * d.w[i];
        sw += wi;
        swt += wi * d.t[i];
        swtt += wi * d.t[i] * d.t[i];
        swy += wi * d.y[i];
        swty += wi * d.t[i] * d.y[i];
    }
    const double det = sw * swtt - swt * swt;
    if (std::abs(det) > 1e-12 * std::max(1.0, sw * swtt)) {
        s.slope = (sw * swty - swt * swy) / det;
        s.intercept = (swtt * swy - swt * swty) / det;
    } else {
        s.slope = 0.0;
        s.intercept = sw > 0 ? swy / sw : 0.0;
    }
    const auto [mn, mx] = std::minmax_element(d.y.begin(), d.y.end());
    s.amplitude = 0.5 * (*mx - *mn);
    s.mean = std::accumulate(d.y.begin(), d.y.end(), 0.0) / static_cast<double>(n);
    // median via partial sort; skew sign picks upward vs downward surges
    std::vector<double> sorted = d.y;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    const double median = sorted[n / 2];
    if (s.mean < median) s.amplitude = -s.amplitude;
    return s;
}

double clamp_to(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

ModelParams clamp_params(ModelParams p, const ParamBounds& b) {
    p.r = clamp_to(p.r, b.r_lo, b.r_hi);
    p.m_cyc = clamp_to(p.m_cyc, b.m_cyc_lo, b.m_cyc_hi);
    p.k = clamp_to(p.k, b.k_lo, b.k_hi);
    p.omega = clamp_to(p.omega, b.omega_lo, b.omega_hi);
    p.phi = clamp_to(p.phi, b.phi_lo, b.phi_hi);
    p.m_lin = clamp_to(p.m_lin, b.m_lin_lo, b.m_lin_hi);
    p.c_lin = clamp_to(p.c_lin, b.c_lin_lo, b.c_lin_hi);
    return p;
}

/// Multi-start grid. A weighted linear fit anchors every start; the cyclical
/// starts sweep phase, spikiness and three frequencies spanning the allowed
/// band, because each creates its own local minima (a fit started at the
/// annual frequency happily locks onto half of a faster true frequency).
/// High-k starts come in both orientations: upward and downward surges are
/// not phase shifts of each other.
std::vector<ModelParams> build_starts(ModelKind kind, const SeriesSummary& s,
                                      const ParamBounds& b) {
    const double amp = std::abs(s.amplitude) > 1e-6 ? s.amplitude : 0.05;
    const std::array<double, 4> phases{0.0, kPi / 2.0, kPi, 3.0 * kPi / 2.0};
    const std::array<double, 3> omegas{std::min(b.omega_hi, std::max(b.omega_lo * 1.1, 0.066)),
                                       kOmegaAnnual, b.omega_hi * 0.93};
    std::vector<ModelParams> starts;
    ModelParams base = frozen_defaults(kind);
    base.m_lin = s.slope;
    base.c_lin = s.intercept;
    switch (kind) {
    case ModelKind::linear:
        starts.push_back(base);
        break;
    case ModelKind::sinusoid:
        for (double omega : omegas) {
            for (double phi : phases) {
                ModelParams p = base;
                p.omega = omega;
                p.m_lin = 0.0;
                p.c_lin = s.mean;
                p.m_cyc = std::abs(amp);
                p.phi = phi;
                starts.push_back(p);
            }
        }
        break;
    case ModelKind::sin_plus_lin:
        for (double omega : omegas) {
            for (double phi : phases) {
                ModelParams p = base;
                p.omega = omega;
                p.m_cyc = std::abs(amp);
                p.phi = phi;
                starts.push_back(p);
            }
        }
        break;
    case ModelKind::cyclic:
        for (double omega : omegas) {
            for (double k : {0.5, 4.0}) {
                for (double phi : phases) {
                    ModelParams p = base;
                    p.omega = omega;
                    p.k = k;
                    p.phi = phi;
                    // peaks reach m_cyc; between them the floor is m_cyc*e^{-2k}
                    p.m_cyc = k < 1.0 ? s.mean : s.mean + std::abs(amp);
                    starts.push_back(p);
                }
            }
        }
        break;
    case ModelKind::full: {
        ModelParams ols = base;
        ols.r = 0.0;
        ols.omega = kOmegaAnnual;
        ols.m_cyc = amp;
        ols.k = 0.5;
        ols.phi = 0.0;
        starts.push_back(ols);
        for (double omega : omegas) {
            for (double phi : phases) {
                ModelParams smooth = base;
                smooth.r = 0.5;
                smooth.omega = omega;
                smooth.k = 0.5;
                smooth.phi = phi;
                smooth.m_cyc = amp; // skew-signed amplitude
                starts.push_back(smooth);
                for (double orient : {1.0, -1.0}) {
                    ModelParams spiky = smooth;
                    spiky.k = 4.0;
                    spiky.m_cyc = orient * std::abs(amp);
                    starts.push_back(spiky);
                }
            }
        }
        break;
    }
    }
    for (auto& p : starts) p = clamp_params(p, b);
    return starts;
}

double wrap_phase(double phi) {
    double w = std::fmod(phi, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

} // namespace

const char* to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::linear: return "linear";
    case ModelKind::sinusoid: return "sinusoid";
    case ModelKind::sin_plus_lin: return "sin_plus_lin";
    case ModelKind::cyclic: return "cyclic";
    case ModelKind::full: return "full";
    }
    return "full";
}

ModelKind model_kind_from_string(const std::string& name) {
    for (ModelKind kind : kAllModelKinds) {
        if (name == to_string(kind)) return kind;
    }
    throw ParseError("unknown model kind '" + name + "'");
}

double eval_model(const ModelParams& p, ModelKind kind, double t) {
    double s, c, e, out;
    eval_grid_impl(p, kind, &t, 1, &s, &c, &e, &out);
    return out;
}

void eval_model_grid(const ModelParams& p, ModelKind kind, const double* t, std::size_t n,
                     double* out) {
    std::vector<double> s(n), c(n), e(n);
    eval_grid_impl(p, kind, t, n, s.data(), c.data(), e.data(), out);
}

Vec model_residuals(const ModelParams& params, ModelKind kind, const TrendSeries& series) {
    const Design design(series);
    const std::size_t n = design.size();
    eval_grid_impl(params, kind, design.t.data(), n, design.sin_v.data(), design.cos_v.data(),
                   design.exp_v.data(), design.f_v.data());
    Vec r(static_cast<Eigen::Index>(n));
    kernels::active().weighted_residual(design.f_v.data(), design.y.data(), design.w.data(), n,
                                        r.data());
    return r;
}

Mat model_jacobian(const ModelParams& params, ModelKind kind, const TrendSeries& series) {
    const Design design(series);
    const std::size_t n = design.size();
    eval_grid_impl(params, kind, design.t.data(), n, design.sin_v.data(), design.cos_v.data(),
                   design.exp_v.data(), design.f_v.data());
    Mat jac;
    jacobian_impl(params, kind, design, 0.0, jac);
    return jac;
}

FitResult fit_trend(const TrendSeries& series, ModelKind kind, const FitOptions& opts) {
    if (series.buckets.size() < opts.min_weeks) {
        throw InsufficientDataError("series " + series.city + "/" + series.signal + " has " +
                                    std::to_string(series.buckets.size()) + " weeks; need " +
                                    std::to_string(opts.min_weeks));
    }
    const Design design(series);
    const std::size_t n = design.size();
    const ModelParams frozen = frozen_defaults(kind);
    const auto& cols = active_indices(kind);
    const auto lo_arr = bounds_lo(opts.bounds);
    const auto hi_arr = bounds_hi(opts.bounds);

    // The solver works with the phase at the center of the fitted window,
    // where it is nearly orthogonal to omega; anchoring the phase at t = 0
    // makes every frequency step swing the phase across the whole window.
    const double t_mid = 0.5 * (design.t.front() + design.t.back());
    const auto to_eval = [t_mid](ModelParams p) {
        p.phi = p.phi - p.omega * t_mid;
        return p;
    };
    const auto to_internal = [t_mid](ModelParams p) {
        p.phi = wrap_phase(p.phi + p.omega * t_mid);
        return p;
    };

    BoundedProblem problem;
    problem.lower.resize(static_cast<Eigen::Index>(cols.size()));
    problem.upper.resize(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        problem.lower[static_cast<Eigen::Index>(j)] = lo_arr[cols[j]];
        problem.upper[static_cast<Eigen::Index>(j)] = hi_arr[cols[j]];
    }
    problem.residual = [&](const Vec& x) -> Vec {
        const ModelParams p = to_eval(unpack(x, kind, frozen));
        eval_grid_impl(p, kind, design.t.data(), n, design.sin_v.data(), design.cos_v.data(),
                       design.exp_v.data(), design.f_v.data());
        Vec r(static_cast<Eigen::Index>(n));
        kernels::active().weighted_residual(design.f_v.data(), design.y.data(),
                                            design.w.data(), n, r.data());
        return r;
    };
    problem.jacobian = [&](const Vec& x) -> Mat {
        const ModelParams p = to_eval(unpack(x, kind, frozen));
        // refresh scratch for this parameter point
        eval_grid_impl(p, kind, design.t.data(), n, design.sin_v.data(), design.cos_v.data(),
                       design.exp_v.data(), design.f_v.data());
        Mat jac;
        jacobian_impl(p, kind, design, t_mid, jac);
        return jac;
    };

    // grid phases are already window-center phases; mapped seeds carry the
    // public t = 0 convention and need conversion
    std::vector<ModelParams> starts = build_starts(kind, summarize(design), opts.bounds);
    if (kind == ModelKind::full) {
        for (const auto& seed : opts.extra_seeds) {
            starts.push_back(to_internal(clamp_params(seed, opts.bounds)));
        }
    }

    bool have_best = false;
    SolveResult best;
    ModelParams best_params;
    std::ostringstream failures;
    for (const auto& start : starts) {
        problem.x0 = pack(start, kind);
        try {
            SolveResult res = solve_bounded_nls(problem, opts.solver);
            if (!have_best || res.cost < best.cost) {
                have_best = true;
                best = res;
                best_params = unpack(res.x, kind, frozen);
            }
        } catch (const Error& e) {
            failures << e.what() << "; ";
        }
    }
    if (!have_best) {
        throw FitError("all starts failed for " + series.city + "/" + series.signal + ": " +
                       failures.str());
    }

    // restart damping from the incumbent; rescues solves that stalled with a
    // blown-up trust region on the small-k ridge
    for (int round = 0; round < 3; ++round) {
        problem.x0 = pack(best_params, kind);
        SolveResult polished;
        try {
            polished = solve_bounded_nls(problem, opts.solver);
        } catch (const Error&) {
            break;
        }
        if (polished.cost < best.cost * (1.0 - 1e-12)) {
            best = polished;
            best_params = unpack(polished.x, kind, frozen);
        } else {
            best.converged = best.converged || polished.converged;
            break;
        }
    }

    FitResult fit;
    fit.kind = kind;
    fit.params = to_eval(best_params);
    fit.params.phi = wrap_phase(fit.params.phi);
    fit.n_weeks = static_cast<int>(n);
    fit.start_week = design.start_week;
    fit.last_week = design.last_week;
    fit.converged = best.converged;
    // cost recomputed from the stored (phase-wrapped) parameters so the
    // serialized record is self-consistent
    eval_grid_impl(fit.params, kind, design.t.data(), n, design.sin_v.data(),
                   design.cos_v.data(), design.exp_v.data(), design.f_v.data());
    fit.weighted_cost = kernels::active().weighted_ssr(design.f_v.data(), design.y.data(),
                                                       design.w.data(), n);
    return fit;
}

std::vector<ModelParams> map_to_full_seeds(const FitResult& fit, const TrendSeries& series) {
    const ModelParams& p = fit.params;
    switch (fit.kind) {
    case ModelKind::full:
        return {p};
    case ModelKind::linear: {
        // exact: r = 0 reproduces the line regardless of the cyclic block
        ModelParams seed = p;
        seed.r = 0.0;
        seed.m_cyc = 0.05;
        seed.k = 0.5;
        seed.omega = kOmegaAnnual;
        seed.phi = 0.0;
        return {seed};
    }
    case ModelKind::cyclic: {
        ModelParams seed = p;
        seed.r = 1.0; // exact: the linear block is multiplied out
        seed.m_lin = 0.0;
        seed.c_lin = 0.0;
        return {seed};
    }
    case ModelKind::sinusoid:
    case ModelKind::sin_plus_lin: {
        // Amplitude-matched surges at a few small k. Smaller k means less
        // shape distortion but needs a larger r*m_cyc to hold the amplitude.
        const double amp = std::abs(p.m_cyc);
        const double sign = p.m_cyc < 0.0 ? -1.0 : 1.0;
        std::vector<double> t;
        t.reserve(series.buckets.size());
        const std::int64_t w0 = series.buckets.front().week;
        for (const auto& b : series.buckets) t.push_back(static_cast<double>(b.week - w0));
        std::vector<double> surge(t.size());

        std::vector<ModelParams> seeds;
        for (double k_mult : {1.2, 2.0, 4.0}) {
            // both orientations: a downward surge half a period out of phase
            // carries the same first harmonic but shifts the offset the other
            // way, which matters when c_lin would otherwise hit a bound
            for (double orient : {1.0, -1.0}) {
                ModelParams seed;
                seed.k = clamp_to(std::max(k_mult * amp, 0.02), 0.01, 20.0);
                seed.omega = p.omega;
                seed.phi = orient > 0.0 ? p.phi : p.phi + kPi;
                const double half_swing = 0.5 * (1.0 - std::exp(-2.0 * seed.k));
                seed.m_cyc = sign * orient;
                seed.r = clamp_to(amp / std::max(half_swing, 1e-9), 0.01, 0.95);
                ModelParams surge_only;
                surge_only.r = 1.0;
                surge_only.m_cyc = seed.m_cyc;
                surge_only.k = seed.k;
                surge_only.omega = seed.omega;
                surge_only.phi = seed.phi;
                eval_model_grid(surge_only, ModelKind::cyclic, t.data(), t.size(), surge.data());
                const double mean_surge = std::accumulate(surge.begin(), surge.end(), 0.0) /
                                          static_cast<double>(t.size());
                seed.m_lin = clamp_to(p.m_lin / (1.0 - seed.r), -0.1, 0.1);
                seed.c_lin =
                    clamp_to((p.c_lin - seed.r * mean_surge) / (1.0 - seed.r), -1.0, 2.0);
                seeds.push_back(seed);
            }
        }
        return seeds;
    }
    }
    return {p};
}

std::map<ModelKind, FitResult> fit_all_kinds(const TrendSeries& series, const FitOptions& opts) {
    std::map<ModelKind, FitResult> fits;
    FitOptions full_opts = opts;
    for (ModelKind kind :
         {ModelKind::linear, ModelKind::sinusoid, ModelKind::sin_plus_lin, ModelKind::cyclic}) {
        FitResult fit = fit_trend(series, kind, opts);
        for (auto& seed : map_to_full_seeds(fit, series)) {
            full_opts.extra_seeds.push_back(seed);
        }
        fits.emplace(kind, std::move(fit));
    }
    fits.emplace(ModelKind::full, fit_trend(series, ModelKind::full, full_opts));
    return fits;
}

std::vector<std::pair<std::int64_t, double>> forecast(const FitResult& fit, int horizon) {
    if (horizon < 1) throw ContractError("forecast horizon must be >= 1");
    std::vector<std::pair<std::int64_t, double>> out;
    out.reserve(static_cast<std::size_t>(horizon));
    for (int h = 1; h <= horizon; ++h) {
        const std::int64_t week = fit.last_week + h;
        const double t = static_cast<double>(week - fit.start_week);
        const double value = clamp_to(eval_model(fit.params, fit.kind, t), 0.0, 1.0);
        out.emplace_back(week, value);
    }
    return out;
}

ForecastMetrics forecast_metrics(const std::vector<double>& pred,
                                 const std::vector<double>& truth) {
    if (pred.size() != truth.size()) {
        throw ContractError("forecast_metrics: prediction and truth lengths differ");
    }
    if (pred.empty()) throw ContractError("forecast_metrics: empty inputs");
    ForecastMetrics m;
    double ape_sum = 0.0;
    std::size_t ape_n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double err = std::abs(pred[i] - truth[i]);
        m.mae += err;
        if (truth[i] > 0.0) {
            ape_sum += err / truth[i];
            ++ape_n;
        } else {
            ++m.zero_truth_skipped;
        }
    }
    m.mae /= static_cast<double>(pred.size());
    m.mape = ape_n > 0 ? 100.0 * ape_sum / static_cast<double>(ape_n) : 0.0;
    return m;
}

PhaseMatrix phase_difference_matrix(const std::vector<FitRecord>& fits) {
    if (!fits.empty()) {
        const std::string& signal = fits.front().signal;
        for (const auto& f : fits) {
            if (f.signal != signal) {
                throw ContractError("phase_difference_matrix: mixed signals ('" + signal +
                                    "' vs '" + f.signal + "')");
            }
        }
    }
    PhaseMatrix out;
    std::vector<const FitRecord*> eligible;
    for (const auto& f : fits) {
        const double rel = std::abs(f.fit.params.omega - kOmegaAnnual) / kOmegaAnnual;
        if (f.fit.kind != ModelKind::linear && rel <= 0.2) {
            eligible.push_back(&f);
        } else {
            out.excluded.push_back(f.city);
        }
    }
    if (eligible.size() < 2) {
        throw AnalysisError("phase analysis needs >= 2 cities with near-annual fits; have " +
                            std::to_string(eligible.size()));
    }
    std::sort(eligible.begin(), eligible.end(),
              [](const FitRecord* a, const FitRecord* b) { return a->city < b->city; });
    const auto m = static_cast<Eigen::Index>(eligible.size());
    out.weeks.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        out.cities.push_back(eligible[static_cast<std::size_t>(i)]->city);
        for (Eigen::Index j = 0; j < m; ++j) {
            const double a = eligible[static_cast<std::size_t>(i)]->fit.params.phi;
            const double b = eligible[static_cast<std::size_t>(j)]->fit.params.phi;
            double d = std::fmod(std::abs(a - b), kTwoPi);
            d = std::min(d, kTwoPi - d);
            out.weeks(i, j) = d * 52.0 / kTwoPi;
        }
    }
    return out;
}

std::vector<FitRecord> rank_spikiness(std::vector<FitRecord> fits, bool positive_only,
                                      double r_floor) {
    std::vector<FitRecord> ranked;
    for (auto& f : fits) {
        if (f.fit.kind != ModelKind::full && f.fit.kind != ModelKind::cyclic) continue;
        if (positive_only) {
            if (f.fit.params.m_cyc <= 0.0) continue;
            if (f.fit.kind == ModelKind::full && f.fit.params.r < r_floor) continue;
        }
        ranked.push_back(std::move(f));
    }
    std::sort(ranked.begin(), ranked.end(), [](const FitRecord& a, const FitRecord& b) {
        if (a.fit.params.k != b.fit.params.k) return a.fit.params.k > b.fit.params.k;
        const double am = std::abs(a.fit.params.m_cyc), bm = std::abs(b.fit.params.m_cyc);
        if (am != bm) return am > bm;
        if (a.city != b.city) return a.city < b.city;
        return a.signal < b.signal;
    });
    return ranked;
}

namespace {

json fit_record_to_json(const FitRecord& f) {
    json j;
    j["city"] = f.city;
    j["signal"] = f.signal;
    j["kind"] = to_string(f.fit.kind);
    j["params"] = {{"r", f.fit.params.r},         {"m_cyc", f.fit.params.m_cyc},
                   {"k", f.fit.params.k},         {"omega", f.fit.params.omega},
                   {"phi", f.fit.params.phi},     {"m_lin", f.fit.params.m_lin},
                   {"c_lin", f.fit.params.c_lin}};
    j["weighted_cost"] = f.fit.weighted_cost;
    j["n_weeks"] = f.fit.n_weeks;
    j["start_week"] = f.fit.start_week;
    return j;
}

} // namespace

std::string fit_records_to_json(const std::vector<FitRecord>& fits) {
    json arr = json::array();
    for (const auto& f : fits) arr.push_back(fit_record_to_json(f));
    return arr.dump(2) + "\n";
}

std::vector<FitRecord> fit_records_from_json(const std::string& text) {
    json arr = json::parse(text, nullptr, false);
    if (arr.is_discarded() || !arr.is_array()) throw ParseError("fits JSON must be an array");
    std::vector<FitRecord> out;
    out.reserve(arr.size());
    for (const auto& j : arr) {
        FitRecord f;
        f.city = j.at("city").get<std::string>();
        f.signal = j.at("signal").get<std::string>();
        f.fit.kind = model_kind_from_string(j.at("kind").get<std::string>());
        const auto& p = j.at("params");
        f.fit.params.r = p.at("r").get<double>();
        f.fit.params.m_cyc = p.at("m_cyc").get<double>();
        f.fit.params.k = p.at("k").get<double>();
        f.fit.params.omega = p.at("omega").get<double>();
        f.fit.params.phi = p.at("phi").get<double>();
        f.fit.params.m_lin = p.at("m_lin").get<double>();
        f.fit.params.c_lin = p.at("c_lin").get<double>();
        f.fit.weighted_cost = j.at("weighted_cost").get<double>();
        f.fit.n_weeks = j.at("n_weeks").get<int>();
        f.fit.start_week = j.at("start_week").get<std::int64_t>();
        f.fit.last_week = f.fit.start_week + f.fit.n_weeks - 1;
        f.fit.converged = true;
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace geostyle
