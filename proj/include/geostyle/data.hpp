#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace geostyle {

/// One detected person: city, calendar date, per-attribute boolean labels,
/// optional caption text and embedding vector.
struct DetectionRecord {
    std::string id;
    std::string city;
    int year = 0;
    int month = 0;
    int day = 0;
    std::map<std::string, bool> attributes;
    std::optional<std::string> caption;
    std::optional<std::vector<double>> embedding;
};

/// One week of aggregated counts for a signal in a city.
/// p_hat = positives/total; sigma is the binomial standard error of the
/// Laplace-smoothed proportion p~ = (positives+1)/(total+2), which keeps the
/// weight finite at 0% and 100%.
struct WeekBucket {
    std::int64_t week = 0;
    std::int64_t positives = 0;
    std::int64_t total = 0;
    double p_hat = 0.0;
    double sigma = 0.0;
};

/// Weekly trend of one signal (attribute or style cluster) in one city.
/// Buckets are strictly increasing in week; weeks without observations are
/// simply absent.
struct TrendSeries {
    std::string city;
    std::string signal;
    std::vector<WeekBucket> buckets;
};

/// Outcome of parsing a line-delimited detection stream.
struct ParsedDetections {
    std::vector<DetectionRecord> records;
    std::size_t skipped = 0;
    std::vector<std::string> skip_reasons; // capped sample, for diagnostics
};

/// Week index of a calendar date: floor(days since Monday 1970-01-05 / 7).
/// Weeks run Monday through Sunday.
std::int64_t week_index(int year, int month, int day);

/// Parses "YYYY-MM-DD"; throws ParseError on malformed or invalid dates.
std::int64_t week_index(const std::string& iso_date);

/// Monday that starts the given week, as "YYYY-MM-DD".
std::string week_start_date(std::int64_t week);

/// Builds a smoothed bucket from raw counts. total must be positive.
WeekBucket make_bucket(std::int64_t week, std::int64_t positives, std::int64_t total);

/// Reads JSON-lines detection records. Malformed lines are counted, not
/// fatal; throws CorpusError if more than half the non-empty lines are bad,
/// IoError if the stream is unreadable.
ParsedDetections parse_detections(std::istream& in);
ParsedDetections parse_detections_file(const std::string& path);

/// Serializes records back to the canonical JSONL schema (stable key order).
void write_detections(std::ostream& out, const std::vector<DetectionRecord>& records);

/// Weekly aggregation of one attribute in one city. A record is a trial only
/// if it carries the attribute key; weeks with fewer than min_total trials
/// are dropped. Throws SignalError if no record in the city carries the key.
TrendSeries aggregate_weekly(const std::vector<DetectionRecord>& records,
                             const std::string& city, const std::string& signal,
                             std::int64_t min_total = 1);

/// All (city, attribute) pairs present in the records, sorted.
std::vector<std::pair<std::string, std::string>>
list_city_signals(const std::vector<DetectionRecord>& records);

/// Pre-aggregated series CSV: header `city,signal,week,positives,total`.
std::vector<TrendSeries> read_series_csv(std::istream& in);
std::vector<TrendSeries> read_series_csv_file(const std::string& path);
void write_series_csv(std::ostream& out, const std::vector<TrendSeries>& series);
void write_series_csv_file(const std::string& path, const std::vector<TrendSeries>& series);

} // namespace geostyle
