#include "geostyle/events.hpp"

#include "geostyle/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

using json = nlohmann::json;

namespace geostyle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogPFloor = -690.77552789821368; // ln(1e-300)

double clamp_p0(double p0) { return std::min(std::max(p0, 1e-9), 1.0 - 1e-9); }

} // namespace

std::pair<double, double> binomial_pvalue(std::int64_t k, std::int64_t n, double p0) {
    if (n < 1 || k < 0 || k > n) {
        throw ContractError("binomial_pvalue: need 0 <= k <= n, n >= 1");
    }
    const double p = clamp_p0(p0);
    const double q = 1.0 - p;
    if (k == 0) return {1.0, 0.0};

    const double odds = p / q;
    const auto log_term = [&](std::int64_t j) {
        return std::lgamma(static_cast<double>(n) + 1.0) -
               std::lgamma(static_cast<double>(j) + 1.0) -
               std::lgamma(static_cast<double>(n - j) + 1.0) +
               static_cast<double>(j) * std::log(p) + static_cast<double>(n - j) * std::log(q);
    };

    const auto mode = static_cast<std::int64_t>(std::floor((static_cast<double>(n) + 1.0) * p));
    constexpr double eps = 1e-18;

    if (k > mode) {
        // upper tail summed away from the mode: terms strictly decrease
        const double lead = log_term(k);
        double sum = 1.0;
        double term = 1.0;
        for (std::int64_t j = k + 1; j <= n; ++j) {
            term *= static_cast<double>(n - j + 1) / static_cast<double>(j) * odds;
            sum += term;
            if (term < eps * sum) break;
        }
        const double log_p = lead + std::log(sum);
        return {std::max(std::exp(log_p), 1e-300), log_p};
    }

    // k <= mode: accumulate the complement P(X <= k-1) downward from k-1
    const double lead = log_term(k - 1);
    double sum = 1.0;
    double term = 1.0;
    for (std::int64_t j = k - 1; j >= 1; --j) {
        term *= static_cast<double>(j) / static_cast<double>(n - j + 1) / odds;
        sum += term;
        if (term < eps * sum) break;
    }
    const double complement = std::exp(lead + std::log(sum));
    const double pv = std::max(1.0 - complement, 1e-300);
    return {pv, std::log1p(-std::min(complement, 1.0 - 1e-300))};
}

std::vector<Outlier> detect_outliers(const TrendSeries& series, const FitResult& fit,
                                     const EventConfig& cfg) {
    std::vector<Outlier> out;
    for (const auto& bucket : series.buckets) {
        const double t = static_cast<double>(bucket.week - fit.start_week);
        const double p0 = clamp_p0(eval_model(fit.params, fit.kind, t));
        const auto [p_value, log_p] = binomial_pvalue(bucket.positives, bucket.total, p0);
        if (p_value < cfg.alpha) {
            Outlier o;
            o.week = bucket.week;
            o.p_value = p_value;
            o.log_p = log_p;
            o.saliency = std::exp(-std::max(log_p, kLogPFloor));
            out.push_back(o);
        }
    }
    return out;
}

double pair_cost(std::int64_t delta, const EventConfig& cfg) {
    if (delta < 1) throw ContractError("pair_cost: delta must be >= 1");
    if (delta < cfg.delta_max) {
        return (static_cast<double>(delta) + cfg.c) / (static_cast<double>(cfg.delta_max) + cfg.c);
    }
    const std::int64_t m = delta % cfg.year_weeks;
    const std::int64_t d = std::min(m, cfg.year_weeks - m);
    if (delta >= cfg.year_weeks - cfg.d_max && d < cfg.d_max) {
        return (static_cast<double>(d) + cfg.b) / (static_cast<double>(cfg.d_max) + cfg.b);
    }
    return kInf;
}

double group_cost(const std::vector<Outlier>& group, const EventConfig& cfg) {
    if (group.empty()) throw ContractError("group_cost: empty group");
    double temporal = 1.0;
    if (group.size() > 1) {
        double sum = 0.0;
        for (std::size_t i = 1; i < group.size(); ++i) {
            sum += pair_cost(group[i].week - group[i - 1].week, cfg);
        }
        temporal = sum / static_cast<double>(group.size() - 1);

        // One event's outliers are deviations of the same phenomenon, so
        // their saliencies live on a common scale. Without this bar, the
        // mean-saliency structure lets a p ~ 1e-20 spike carry any number of
        // p ~ 0.01 blips for free, and the partition pads strong events with
        // incidental noise weeks (or worse, trades a real member for one).
        double strongest = 0.0;
        for (const auto& o : group) strongest = std::min(strongest, o.log_p);
        for (const auto& o : group) {
            if (o.log_p > 0.4 * strongest) return kInf;
        }
    }
    double mean_saliency = 0.0;
    for (const auto& o : group) mean_saliency += o.saliency;
    mean_saliency /= static_cast<double>(group.size());
    return temporal / mean_saliency;
}

namespace {

// Total cost of a partition. Averaging over groups instead would reward
// splitting ultra-salient outliers into extra near-zero-cost singletons
// purely to pad the denominator, dismembering the very events the grouping
// exists to find.
double partition_cost(const std::vector<Outlier>& outliers,
                      const std::vector<std::vector<std::size_t>>& groups,
                      const EventConfig& cfg) {
    double sum = 0.0;
    std::vector<Outlier> scratch;
    for (const auto& g : groups) {
        scratch.clear();
        for (std::size_t idx : g) scratch.push_back(outliers[idx]);
        sum += group_cost(scratch, cfg);
        if (std::isinf(sum)) return kInf;
    }
    return sum;
}

std::vector<std::vector<std::size_t>> groups_from_rgs(const std::vector<std::size_t>& rgs) {
    const std::size_t k = *std::max_element(rgs.begin(), rgs.end()) + 1;
    std::vector<std::vector<std::size_t>> groups(k);
    for (std::size_t i = 0; i < rgs.size(); ++i) groups[rgs[i]].push_back(i);
    return groups;
}

/// Exact search over every set partition via restricted growth strings.
/// Group costs of ultra-salient events sit dozens of orders of magnitude
/// below those of ordinary outliers, so partitions arranging the salient
/// weeks differently often tie to machine precision; ties go to the
/// partition with fewer groups, i.e. merging wins when the cost cannot tell.
Partition exact_partition(const std::vector<Outlier>& outliers, const EventConfig& cfg) {
    const std::size_t m = outliers.size();
    std::vector<std::size_t> rgs(m, 0);
    std::vector<std::size_t> maxima(m, 0); // maxima[i] = max(rgs[0..i])
    Partition best;
    best.cost = kInf;
    std::size_t best_groups = m + 1;
    for (;;) {
        auto groups = groups_from_rgs(rgs);
        const double cost = partition_cost(outliers, groups, cfg);
        const double tol = 1e-9 * std::min(cost, best.cost);
        bool take = false;
        if (cost < best.cost - tol) {
            take = true;
        } else if (cost <= best.cost + tol && groups.size() < best_groups) {
            take = true;
        }
        if (take) {
            best.cost = cost;
            best_groups = groups.size();
            best.groups = std::move(groups);
        }
        // next restricted growth string
        std::size_t i = m;
        while (i-- > 1) {
            if (rgs[i] <= maxima[i - 1]) {
                ++rgs[i];
                maxima[i] = std::max(maxima[i - 1], rgs[i]);
                for (std::size_t j = i + 1; j < m; ++j) {
                    rgs[j] = 0;
                    maxima[j] = maxima[i];
                }
                break;
            }
        }
        if (i == 0) break;
    }
    best.exact = true;
    return best;
}

/// Greedy agglomeration for large outlier sets. Merge deltas come from the
/// two group costs directly, never from re-summing the whole partition, so a
/// merge that saves 1e-18 stays visible next to noise groups costing 1e-2.
Partition greedy_partition(const std::vector<Outlier>& outliers, const EventConfig& cfg) {
    Partition part;
    std::vector<double> costs;
    std::vector<Outlier> scratch;
    auto cost_of = [&](const std::vector<std::size_t>& group) {
        scratch.clear();
        for (std::size_t idx : group) scratch.push_back(outliers[idx]);
        return group_cost(scratch, cfg);
    };
    for (std::size_t i = 0; i < outliers.size(); ++i) {
        part.groups.push_back({i});
        costs.push_back(cost_of(part.groups.back()));
    }
    part.exact = false;
    for (;;) {
        double best_delta = 0.0;
        double best_merged_cost = 0.0;
        std::vector<std::size_t> best_merged;
        std::size_t best_a = 0, best_b = 0;
        bool found = false;
        for (std::size_t a = 0; a < part.groups.size(); ++a) {
            for (std::size_t b = a + 1; b < part.groups.size(); ++b) {
                std::vector<std::size_t> merged = part.groups[a];
                merged.insert(merged.end(), part.groups[b].begin(), part.groups[b].end());
                std::sort(merged.begin(), merged.end());
                const double merged_cost = cost_of(merged);
                if (std::isinf(merged_cost)) continue;
                const double delta = merged_cost - costs[a] - costs[b];
                const double tol = 1e-12 * std::max(1.0, costs[a] + costs[b]);
                if (delta < tol && (!found || delta < best_delta)) {
                    best_delta = delta;
                    best_merged_cost = merged_cost;
                    best_merged = std::move(merged);
                    best_a = a;
                    best_b = b;
                    found = true;
                }
            }
        }
        if (!found) break;
        part.groups[best_a] = std::move(best_merged);
        costs[best_a] = best_merged_cost;
        part.groups.erase(part.groups.begin() + static_cast<std::ptrdiff_t>(best_b));
        costs.erase(costs.begin() + static_cast<std::ptrdiff_t>(best_b));
    }
    part.cost = 0.0;
    for (double c : costs) part.cost += c;
    return part;
}

} // namespace

Partition best_partition(const std::vector<Outlier>& outliers, const EventConfig& cfg) {
    for (std::size_t i = 1; i < outliers.size(); ++i) {
        if (outliers[i].week <= outliers[i - 1].week) {
            throw ContractError("best_partition: outliers must be strictly increasing in week");
        }
    }
    if (outliers.empty()) return {};
    if (outliers.size() <= cfg.max_outliers_exact) {
        return exact_partition(outliers, cfg);
    }
    return greedy_partition(outliers, cfg);
}

const char* to_string(EventClass c) {
    return c == EventClass::one_off ? "one_off" : "annual";
}

std::vector<Event> extract_events(const std::vector<TrendSeries>& series,
                                  const std::vector<FitRecord>& fits,
                                  const EventConfig& cfg) {
    std::map<std::pair<std::string, std::string>, const FitRecord*> by_key;
    for (const auto& f : fits) by_key[{f.city, f.signal}] = &f;

    std::vector<Event> events;
    for (const auto& s : series) {
        auto it = by_key.find({s.city, s.signal});
        if (it == by_key.end()) {
            throw ContractError("extract_events: no fit for " + s.city + "/" + s.signal);
        }
        const auto outliers = detect_outliers(s, it->second->fit, cfg);
        if (outliers.empty()) continue;
        const Partition part = best_partition(outliers, cfg);
        for (const auto& group : part.groups) {
            Event e;
            e.city = s.city;
            e.signal = s.signal;
            std::vector<Outlier> members;
            for (std::size_t idx : group) members.push_back(outliers[idx]);
            for (const auto& o : members) e.weeks.push_back(o.week);
            e.cost = group_cost(members, cfg);
            e.saliency = 1.0 / e.cost;
            bool all_proximal = true;
            for (std::size_t i = 1; i < e.weeks.size(); ++i) {
                if (e.weeks[i] - e.weeks[i - 1] >= cfg.delta_max) {
                    all_proximal = false;
                    break;
                }
            }
            e.classification = all_proximal ? EventClass::one_off : EventClass::annual;
            events.push_back(std::move(e));
        }
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.saliency != b.saliency) return a.saliency > b.saliency;
        if (a.city != b.city) return a.city < b.city;
        if (a.signal != b.signal) return a.signal < b.signal;
        return a.weeks.front() < b.weeks.front();
    });
    return events;
}

std::string events_to_json(const std::vector<Event>& events) {
    json arr = json::array();
    for (const auto& e : events) {
        json j;
        j["city"] = e.city;
        j["signal"] = e.signal;
        j["weeks"] = e.weeks;
        json iso = json::array();
        for (auto w : e.weeks) iso.push_back(week_start_date(w));
        j["iso_weeks"] = iso;
        j["cost"] = e.cost;
        j["saliency"] = e.saliency;
        j["classification"] = to_string(e.classification);
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

} // namespace geostyle
