#pragma once

#include "geostyle/baselines.hpp"
#include "geostyle/data.hpp"
#include "geostyle/events.hpp"
#include "geostyle/trend.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace geostyle {

struct InjectedEvent {
    std::vector<std::int64_t> weeks; // absolute week indices
    double delta = 0.0;              // probability boost in (0, 1]
};

/// Ground-truth recipe for one synthetic trend series.
struct SynthSpec {
    ModelParams params;
    ModelKind kind = ModelKind::full;
    int n_weeks = 156;
    std::vector<std::int64_t> samples_per_week; // one entry = constant
    std::uint64_t seed = 0;
    std::int64_t start_week = 2200;
    std::vector<InjectedEvent> injected;
    bool noise_free = false; // expected counts, rounded, instead of binomial draws
};

struct GeneratedSeries {
    TrendSeries series;
    std::vector<double> true_p; // clamped weekly success probability
};

/// Samples the weekly counts of one synthetic series; fully seed-determined.
GeneratedSeries generate_series(const SynthSpec& spec, const std::string& city,
                                const std::string& signal);

/// Detection-level synthesis for one city: every record carries a flag for
/// each signal, so record-level resampling is meaningful. Specs must share
/// n_weeks/start_week/samples_per_week. caption_token, when set for a spec,
/// is planted in captions of positive records during its injected weeks.
struct CitySynthSignal {
    std::string signal;
    SynthSpec spec;
    std::string caption_token; // optional
};
std::vector<DetectionRecord> generate_city_detections(const std::string& city,
                                                      const std::vector<CitySynthSignal>& signals,
                                                      std::uint64_t seed);

/// The standard synthetic panel: 25 signals x 4 cities, 150-200 weeks,
/// mixed regimes (seasonal surges, near-zero r with drift, high-k spikes).
struct PanelEntry {
    std::string city;
    std::string signal;
    SynthSpec spec;
    GeneratedSeries generated;
};
std::vector<PanelEntry> standard_panel(std::uint64_t seed);

struct EvalCell {
    double mae = 0.0;
    double mape = 0.0;
    std::size_t n_series = 0;
};

struct SeriesFits {
    std::string city;
    std::string signal;
    std::map<ModelKind, FitResult> fits;
};

struct EvalReport {
    std::vector<int> horizons;
    // model name -> horizon -> averaged metrics
    std::map<std::string, std::map<int, EvalCell>> cells;
    std::size_t skipped_short = 0;
    std::vector<SeriesFits> fits; // training-window fits, for nesting checks
};

struct EvalOptions {
    std::vector<int> horizons{1, 26};
    FitOptions fit;
    BaselineOptions baseline;
    bool include_var = true;
    unsigned threads = 0;
};

/// Benchmarks every model kind and baseline on held-out suffixes: fit on the
/// prefix, score MAE/MAPE on the first h held-out weeks per horizon h.
/// VAR panels group the signals of one city.
EvalReport evaluate_forecasts(const std::vector<TrendSeries>& panel, const EvalOptions& opts);

std::string eval_report_to_csv(const EvalReport& report);
std::string eval_report_to_json(const EvalReport& report);

struct RetentionPoint {
    double threshold = 0.0;
    double retention = 0.0;
    std::size_t empty_pairs = 0; // pairs with nothing above the threshold
};

struct RetentionCurve {
    std::vector<RetentionPoint> points;
    std::size_t n_resamples = 0;
};

struct RetentionOptions {
    std::size_t n_resamples = 20;
    std::vector<double> thresholds; // empty: deciles of observed saliencies
    EventConfig events;
    FitOptions fit;
    std::int64_t min_total = 1;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

/// Bootstrap stability of event detection: resample records with
/// replacement, rerun trend fitting + event extraction per resample, and
/// report the fraction of events above each saliency threshold in one
/// resample that reappear (same city and signal, overlapping weeks) in
/// another, averaged over ordered resample pairs. Pairs with an empty
/// numerator report 1.0 and are counted.
RetentionCurve bootstrap_retention(const std::vector<DetectionRecord>& records,
                                   const RetentionOptions& opts);

std::string retention_to_csv(const RetentionCurve& curve);

struct RecoveryScore {
    double precision = 0.0;
    double recall = 0.0;
    std::size_t n_detected = 0; // above the saliency floor
    std::size_t n_injected = 0;
};

/// Matches detected events against injected ground truth (same city/signal,
/// >= 1 overlapping week). Only events at or above min_saliency count as
/// detections; background-noise outliers sit orders of magnitude below it.
RecoveryScore score_event_recovery(const std::vector<Event>& detected,
                                   const std::vector<Event>& injected,
                                   double min_saliency = 1e6);

} // namespace geostyle
