#include "geostyle/data.hpp"

#include "geostyle/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using json = nlohmann::json;

namespace geostyle {

namespace {

// Days from 1970-01-01 to the epoch Monday 1970-01-05.
constexpr std::int64_t kEpochMondayOffset = 4;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

} // namespace

std::int64_t week_index(int year, int month, int day) {
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{unsigned(month)},
                             std::chrono::day{unsigned(day)}};
    if (!ymd.ok()) {
        throw ParseError("invalid date " + std::to_string(year) + "-" + std::to_string(month) +
                         "-" + std::to_string(day));
    }
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return floor_div(static_cast<std::int64_t>(days) - kEpochMondayOffset, 7);
}

std::int64_t week_index(const std::string& iso_date) {
    int y = 0, m = 0, d = 0;
    if (iso_date.size() != 10 || iso_date[4] != '-' || iso_date[7] != '-') {
        throw ParseError("date not in YYYY-MM-DD form: '" + iso_date + "'");
    }
    auto parse_int = [&](std::size_t pos, std::size_t len, int& out) {
        auto res = std::from_chars(iso_date.data() + pos, iso_date.data() + pos + len, out);
        return res.ec == std::errc{} && res.ptr == iso_date.data() + pos + len;
    };
    if (!parse_int(0, 4, y) || !parse_int(5, 2, m) || !parse_int(8, 2, d)) {
        throw ParseError("date not in YYYY-MM-DD form: '" + iso_date + "'");
    }
    return week_index(y, m, d);
}

std::string week_start_date(std::int64_t week) {
    using namespace std::chrono;
    const sys_days sd{days{week * 7 + kEpochMondayOffset}};
    const year_month_day ymd{sd};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

WeekBucket make_bucket(std::int64_t week, std::int64_t positives, std::int64_t total) {
    if (total <= 0 || positives < 0 || positives > total) {
        throw ContractError("bucket counts out of range: k=" + std::to_string(positives) +
                            " n=" + std::to_string(total));
    }
    WeekBucket b;
    b.week = week;
    b.positives = positives;
    b.total = total;
    b.p_hat = static_cast<double>(positives) / static_cast<double>(total);
    const double smoothed =
        static_cast<double>(positives + 1) / static_cast<double>(total + 2);
    b.sigma = std::sqrt(smoothed * (1.0 - smoothed) / static_cast<double>(total));
    return b;
}

namespace {

std::optional<DetectionRecord> parse_one(const std::string& line, std::string& reason,
                                         std::optional<std::size_t>& embedding_dim) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        reason = "not a JSON object";
        return std::nullopt;
    }
    DetectionRecord rec;
    if (!j.contains("id") || !j["id"].is_string()) {
        reason = "missing id";
        return std::nullopt;
    }
    rec.id = j["id"].get<std::string>();
    if (!j.contains("city") || !j["city"].is_string()) {
        reason = "missing city";
        return std::nullopt;
    }
    rec.city = j["city"].get<std::string>();
    if (!j.contains("date") || !j["date"].is_string()) {
        reason = "missing date";
        return std::nullopt;
    }
    const std::string date = j["date"].get<std::string>();
    try {
        week_index(date); // validates
    } catch (const ParseError&) {
        reason = "bad date '" + date + "'";
        return std::nullopt;
    }
    rec.year = std::stoi(date.substr(0, 4));
    rec.month = std::stoi(date.substr(5, 2));
    rec.day = std::stoi(date.substr(8, 2));
    if (!j.contains("attributes") || !j["attributes"].is_object()) {
        reason = "missing attributes";
        return std::nullopt;
    }
    for (const auto& [key, value] : j["attributes"].items()) {
        if (key.empty() || !value.is_boolean()) {
            reason = "bad attribute entry";
            return std::nullopt;
        }
        rec.attributes[key] = value.get<bool>();
    }
    if (j.contains("caption") && !j["caption"].is_null()) {
        if (!j["caption"].is_string()) {
            reason = "caption not a string";
            return std::nullopt;
        }
        rec.caption = j["caption"].get<std::string>();
    }
    if (j.contains("embedding") && !j["embedding"].is_null()) {
        if (!j["embedding"].is_array()) {
            reason = "embedding not an array";
            return std::nullopt;
        }
        std::vector<double> emb;
        emb.reserve(j["embedding"].size());
        for (const auto& v : j["embedding"]) {
            if (!v.is_number()) {
                reason = "embedding entry not numeric";
                return std::nullopt;
            }
            emb.push_back(v.get<double>());
        }
        if (embedding_dim && emb.size() != *embedding_dim) {
            reason = "embedding dimension " + std::to_string(emb.size()) +
                     " != dataset dimension " + std::to_string(*embedding_dim);
            return std::nullopt;
        }
        if (!embedding_dim) embedding_dim = emb.size();
        rec.embedding = std::move(emb);
    }
    return rec;
}

} // namespace

ParsedDetections parse_detections(std::istream& in) {
    if (!in.good()) throw IoError("detection stream unreadable");
    ParsedDetections out;
    std::optional<std::size_t> embedding_dim;
    std::string line;
    std::size_t considered = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++considered;
        std::string reason;
        auto rec = parse_one(line, reason, embedding_dim);
        if (rec) {
            out.records.push_back(std::move(*rec));
        } else {
            ++out.skipped;
            if (out.skip_reasons.size() < 20) {
                out.skip_reasons.push_back("line " + std::to_string(considered) + ": " + reason);
            }
        }
    }
    if (in.bad()) throw IoError("detection stream failed mid-read");
    if (considered > 0 && out.skipped * 2 > considered) {
        throw CorpusError("more than 50% of detection lines malformed (" +
                          std::to_string(out.skipped) + "/" + std::to_string(considered) + ")");
    }
    return out;
}

ParsedDetections parse_detections_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return parse_detections(f);
}

void write_detections(std::ostream& out, const std::vector<DetectionRecord>& records) {
    for (const auto& rec : records) {
        json j;
        j["id"] = rec.id;
        j["city"] = rec.city;
        char date[16];
        std::snprintf(date, sizeof(date), "%04d-%02d-%02d", rec.year, rec.month, rec.day);
        j["date"] = date;
        j["attributes"] = json::object();
        for (const auto& [name, flag] : rec.attributes) j["attributes"][name] = flag;
        if (rec.caption) j["caption"] = *rec.caption;
        if (rec.embedding) j["embedding"] = *rec.embedding;
        out << j.dump() << '\n';
    }
}

TrendSeries aggregate_weekly(const std::vector<DetectionRecord>& records,
                             const std::string& city, const std::string& signal,
                             std::int64_t min_total) {
    std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> counts; // week -> (k, n)
    bool signal_seen = false;
    for (const auto& rec : records) {
        if (rec.city != city) continue;
        auto it = rec.attributes.find(signal);
        if (it == rec.attributes.end()) continue;
        signal_seen = true;
        auto& [k, n] = counts[week_index(rec.year, rec.month, rec.day)];
        ++n;
        if (it->second) ++k;
    }
    TrendSeries series;
    series.city = city;
    series.signal = signal;
    if (!signal_seen) {
        bool city_seen =
            std::any_of(records.begin(), records.end(),
                        [&](const DetectionRecord& r) { return r.city == city; });
        if (city_seen) {
            throw SignalError("attribute '" + signal + "' absent from city '" + city + "'");
        }
        return series; // no records for the city: empty series
    }
    for (const auto& [week, kn] : counts) {
        if (kn.second >= min_total) {
            series.buckets.push_back(make_bucket(week, kn.first, kn.second));
        }
    }
    return series;
}

std::vector<std::pair<std::string, std::string>>
list_city_signals(const std::vector<DetectionRecord>& records) {
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& rec : records) {
        for (const auto& [name, _] : rec.attributes) keys.emplace(rec.city, name);
    }
    return {keys.begin(), keys.end()};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

} // namespace

std::vector<TrendSeries> read_series_csv(std::istream& in) {
    if (!in.good()) throw IoError("series stream unreadable");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("series CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "city,signal,week,positives,total") {
        throw ParseError("series CSV header must be 'city,signal,week,positives,total'");
    }
    std::map<std::pair<std::string, std::string>, std::map<std::int64_t, WeekBucket>> table;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 5) {
            throw ParseError("series CSV line " + std::to_string(line_no) + ": expected 5 fields");
        }
        std::int64_t week = 0, k = 0, n = 0;
        try {
            week = std::stoll(fields[2]);
            k = std::stoll(fields[3]);
            n = std::stoll(fields[4]);
        } catch (const std::exception&) {
            throw ParseError("series CSV line " + std::to_string(line_no) + ": bad number");
        }
        if (n <= 0 || k < 0 || k > n) {
            throw ParseError("series CSV line " + std::to_string(line_no) +
                             ": counts out of range");
        }
        auto& per_week = table[{fields[0], fields[1]}];
        if (per_week.count(week)) {
            throw ParseError("series CSV line " + std::to_string(line_no) + ": duplicate week " +
                             std::to_string(week));
        }
        per_week.emplace(week, make_bucket(week, k, n));
    }
    std::vector<TrendSeries> out;
    out.reserve(table.size());
    for (auto& [key, buckets] : table) {
        TrendSeries s;
        s.city = key.first;
        s.signal = key.second;
        s.buckets.reserve(buckets.size());
        for (auto& [_, b] : buckets) s.buckets.push_back(b);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<TrendSeries> read_series_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return read_series_csv(f);
}

void write_series_csv(std::ostream& out, const std::vector<TrendSeries>& series) {
    out << "city,signal,week,positives,total\n";
    for (const auto& s : series) {
        for (const auto& b : s.buckets) {
            out << s.city << ',' << s.signal << ',' << b.week << ',' << b.positives << ','
                << b.total << '\n';
        }
    }
}

void write_series_csv_file(const std::string& path, const std::vector<TrendSeries>& series) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    write_series_csv(f, series);
    if (!f.good()) throw IoError("write failed: " + path);
}

} // namespace geostyle
