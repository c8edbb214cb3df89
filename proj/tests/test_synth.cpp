#include "geostyle/synth.hpp"

#include "geostyle/error.hpp"
#include "geostyle/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace geostyle;

namespace {
constexpr double kAnnual = 2.0 * 3.14159265358979323846 / 52.0;

SynthSpec seasonal_spec(std::uint64_t seed) {
    SynthSpec spec;
    spec.params.r = 0.6;
    spec.params.m_cyc = 0.3;
    spec.params.k = 2.0;
    spec.params.omega = kAnnual;
    spec.params.phi = 1.2;
    spec.params.m_lin = 3e-4;
    spec.params.c_lin = 0.25;
    spec.n_weeks = 156;
    spec.samples_per_week = {300};
    spec.seed = seed;
    return spec;
}

} // namespace

TEST_CASE("generator is deterministic and respects gaps") {
    SynthSpec spec = seasonal_spec(7);
    const auto a = generate_series(spec, "c", "s");
    const auto b = generate_series(spec, "c", "s");
    REQUIRE(a.series.buckets.size() == b.series.buckets.size());
    for (std::size_t i = 0; i < a.series.buckets.size(); ++i) {
        CHECK(a.series.buckets[i].positives == b.series.buckets[i].positives);
    }
    spec.seed = 8;
    const auto c = generate_series(spec, "c", "s");
    bool differs = false;
    for (std::size_t i = 0; i < a.series.buckets.size(); ++i) {
        differs = differs || (a.series.buckets[i].positives != c.series.buckets[i].positives);
    }
    CHECK(differs);

    // zero-sample weeks disappear instead of appearing as zero-total buckets
    SynthSpec gappy = seasonal_spec(7);
    gappy.samples_per_week.assign(static_cast<std::size_t>(gappy.n_weeks), 300);
    gappy.samples_per_week[10] = 0;
    gappy.samples_per_week[11] = 0;
    const auto g = generate_series(gappy, "c", "s");
    CHECK(g.series.buckets.size() == static_cast<std::size_t>(gappy.n_weeks - 2));
    for (const auto& bucket : g.series.buckets) {
        CHECK(bucket.week != gappy.start_week + 10);
        CHECK(bucket.week != gappy.start_week + 11);
    }
}

TEST_CASE("noise-free self consistency: the fit recovers its own generator") {
    SynthSpec spec = seasonal_spec(0);
    spec.noise_free = true;
    spec.samples_per_week = {10000000}; // rounding error becomes negligible
    const auto gen = generate_series(spec, "c", "s");
    const FitResult fit = fit_trend(gen.series, ModelKind::full, {});
    CHECK(fit.weighted_cost < 1e-3);
}

TEST_CASE("injected boost makes the boosted week an outlier under the refit model") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SynthSpec spec = seasonal_spec(seed);
        spec.injected = {{{spec.start_week + 80}, 0.3}};
        const auto gen = generate_series(spec, "c", "s");
        const FitResult fit = fit_trend(gen.series, ModelKind::full, {});
        const auto outliers = detect_outliers(gen.series, fit);
        for (const auto& o : outliers) {
            if (o.week == spec.start_week + 80) {
                ++hits;
                break;
            }
        }
    }
    CHECK(hits >= 9);
}

TEST_CASE("standard panel shape") {
    const auto panel = standard_panel(1);
    CHECK(panel.size() == 100);
    std::set<std::string> cities;
    for (const auto& e : panel) {
        cities.insert(e.city);
        CHECK(e.generated.series.buckets.size() >= 150);
        CHECK(e.generated.series.buckets.size() <= 200);
        for (const auto& b : e.generated.series.buckets) {
            CHECK(b.total == 300);
        }
    }
    CHECK(cities.size() == 4);
    // same master seed reproduces the panel
    const auto again = standard_panel(1);
    CHECK(again[42].generated.series.buckets[17].positives ==
          panel[42].generated.series.buckets[17].positives);
}

TEST_CASE("evaluate_forecasts on realizable noise-free truth") {
    // each model kind achieves ~zero error on data its own family generated
    std::vector<TrendSeries> panel;
    for (int i = 0; i < 3; ++i) {
        SynthSpec spec;
        spec.kind = ModelKind::linear;
        spec.params.r = 0.0;
        spec.params.m_lin = 2e-4 * (i + 1);
        spec.params.c_lin = 0.2 + 0.05 * i;
        spec.n_weeks = 120;
        spec.noise_free = true;
        spec.samples_per_week = {1000000};
        panel.push_back(generate_series(spec, "c" + std::to_string(i), "s").series);
    }
    EvalOptions opts;
    opts.horizons = {1, 26};
    opts.include_var = false;
    const EvalReport report = evaluate_forecasts(panel, opts);
    CHECK(report.cells.at("linear").at(26).mae < 1e-4);
    CHECK(report.cells.at("linear").at(26).n_series == 3);
    CHECK(report.cells.at("full").at(26).mae < 1e-3);
    // a constant forecaster cannot follow a trending series
    CHECK(report.cells.at("mean").at(26).mae > report.cells.at("linear").at(26).mae);
    const std::string csv = eval_report_to_csv(report);
    CHECK(csv.find("model,horizon,mae,mape,n_series") == 0);
    CHECK(csv.find("linear,1,") != std::string::npos);
}

TEST_CASE("evaluate_forecasts skips too-short series and counts them") {
    SynthSpec spec = seasonal_spec(3);
    spec.n_weeks = 20; // cannot hold out 26 weeks
    std::vector<TrendSeries> panel{generate_series(spec, "c", "s").series};
    EvalOptions opts;
    opts.include_var = false;
    const EvalReport report = evaluate_forecasts(panel, opts);
    CHECK(report.skipped_short == 1);
    CHECK(report.cells.empty());
}

TEST_CASE("retention of a deterministic huge event is total") {
    // one strong annual event, heavy sampling: every resample finds it
    std::vector<CitySynthSignal> signals(1);
    signals[0].signal = "yellow";
    signals[0].spec.params.r = 0.0;
    signals[0].spec.params.c_lin = 0.2;
    signals[0].spec.n_weeks = 120;
    signals[0].spec.samples_per_week = {400};
    signals[0].spec.seed = 5;
    signals[0].spec.start_week = 2200;
    signals[0].spec.injected = {{{2240, 2292}, 0.5}};
    const auto records = generate_city_detections("rio", signals, 17);

    // thresholds sit above the saliency reach of background noise outliers
    // (~1e4); only the injected event passes them, in every resample
    RetentionOptions opts;
    opts.n_resamples = 5;
    opts.thresholds = {1e6, 1e12, 1e30};
    opts.seed = 23;
    opts.threads = 2;
    const RetentionCurve curve = bootstrap_retention(records, opts);
    REQUIRE(curve.points.size() == 3);
    for (const auto& p : curve.points) {
        CHECK(p.retention == doctest::Approx(1.0));
        CHECK(p.empty_pairs == 0);
    }
    // a threshold above every saliency is vacuously retained but flagged
    RetentionOptions high = opts;
    high.thresholds = {1e305};
    const RetentionCurve vacuous = bootstrap_retention(records, high);
    CHECK(vacuous.points[0].retention == doctest::Approx(1.0));
    CHECK(vacuous.points[0].empty_pairs == 5 * 4);

    const std::string csv = retention_to_csv(curve);
    CHECK(csv.find("threshold,retention") == 0);
}

TEST_CASE("recovery scoring matches city, signal and overlapping weeks") {
    Event injected;
    injected.city = "rio";
    injected.signal = "yellow";
    injected.weeks = {100, 152};

    Event hit = injected;
    hit.saliency = 1e9;
    Event miss;
    miss.city = "rio";
    miss.signal = "yellow";
    miss.weeks = {300};
    miss.saliency = 1e9;
    Event faint = injected;
    faint.saliency = 10.0; // below the reporting floor

    const RecoveryScore s1 = score_event_recovery({hit, miss}, {injected});
    CHECK(s1.recall == doctest::Approx(1.0));
    CHECK(s1.precision == doctest::Approx(0.5));
    CHECK(s1.n_detected == 2);

    const RecoveryScore s2 = score_event_recovery({faint}, {injected});
    CHECK(s2.n_detected == 0);
    CHECK(s2.recall == doctest::Approx(0.0));
}
