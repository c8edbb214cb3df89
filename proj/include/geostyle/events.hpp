#pragma once

#include "geostyle/data.hpp"
#include "geostyle/trend.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace geostyle {

/// Constants of the event machinery. Defaults are the reference values;
/// delta_max bounds "proximal" gaps, d_max the allowed miss of an annual
/// cycle, year_weeks the cycle length.
struct EventConfig {
    double alpha = 0.05;
    double c = 18.0;
    double b = 15.0;
    std::int64_t delta_max = 2;
    std::int64_t d_max = 5;
    std::int64_t year_weeks = 52;
    std::size_t max_outliers_exact = 10;
};

/// A week whose positive count is improbably high under the fitted trend.
struct Outlier {
    std::int64_t week = 0;
    double p_value = 1.0;
    double log_p = 0.0;    // natural log of the p-value
    double saliency = 1.0; // 1/p, computed from log_p with a 1e-300 floor
};

enum class EventClass { one_off, annual };
const char* to_string(EventClass c);

/// A group of outliers scored by temporal coherence and member saliency.
struct Event {
    std::string city;
    std::string signal;
    std::vector<std::int64_t> weeks;
    double cost = 0.0;     // C(g)
    double saliency = 0.0; // 1/C(g)
    EventClass classification = EventClass::one_off;
};

/// One-tailed binomial tail P(X >= k) under X ~ Binomial(n, p0), computed in
/// log space by summing the shorter tail with a term-ratio recurrence.
/// Returns (p, log_p). p0 outside (0,1) is clamped to [1e-9, 1-1e-9].
std::pair<double, double> binomial_pvalue(std::int64_t k, std::int64_t n, double p0);

/// Flags weeks with p-value < alpha against the fitted trend (positive
/// deviations only). The fitted model supplies the null success rate.
std::vector<Outlier> detect_outliers(const TrendSeries& series, const FitResult& fit,
                                     const EventConfig& cfg = {});

/// Cost of a gap between consecutive outliers: proximal gaps and near-annual
/// gaps are cheap, everything else is infinite.
double pair_cost(std::int64_t delta, const EventConfig& cfg = {});

/// C(g) = mean consecutive pair cost / mean member saliency; singleton
/// temporal cost is 1. Group must be sorted by week. Members must also be of
/// comparable saliency (log p within 0.4x of the strongest member's), since
/// one event's outliers are deviations of the same phenomenon; mixed-scale
/// groups cost +infinity.
double group_cost(const std::vector<Outlier>& group, const EventConfig& cfg = {});

/// Partition of outliers (by index into the input) minimizing the total
/// group cost. Exact enumeration over all set partitions up to
/// cfg.max_outliers_exact outliers; greedy agglomeration beyond that, with
/// `exact` reporting which path ran.
struct Partition {
    std::vector<std::vector<std::size_t>> groups;
    double cost = 0.0; // sum of C(g) over the chosen groups
    bool exact = true;
};
Partition best_partition(const std::vector<Outlier>& outliers, const EventConfig& cfg = {});

/// Full pipeline over fitted series: detect, partition, classify (one_off
/// iff all consecutive gaps < delta_max) and rank globally by descending
/// saliency (ties: city, signal, first week).
std::vector<Event> extract_events(const std::vector<TrendSeries>& series,
                                  const std::vector<FitRecord>& fits,
                                  const EventConfig& cfg = {});

std::string events_to_json(const std::vector<Event>& events);

} // namespace geostyle
