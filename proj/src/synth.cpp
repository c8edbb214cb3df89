#include "geostyle/synth.hpp"

#include "geostyle/error.hpp"
#include "geostyle/parallel.hpp"
#include "geostyle/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

using json = nlohmann::json;

namespace geostyle {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

std::int64_t samples_at(const SynthSpec& spec, int week_offset) {
    if (spec.samples_per_week.empty()) {
        throw ContractError("SynthSpec: samples_per_week must not be empty");
    }
    if (spec.samples_per_week.size() == 1) return spec.samples_per_week[0];
    return spec.samples_per_week.at(static_cast<std::size_t>(week_offset));
}

double clamp01(double v) { return std::min(std::max(v, 0.0), 1.0); }

std::vector<double> weekly_probabilities(const SynthSpec& spec) {
    std::vector<double> p(static_cast<std::size_t>(spec.n_weeks));
    for (int t = 0; t < spec.n_weeks; ++t) {
        p[static_cast<std::size_t>(t)] =
            eval_model(spec.params, spec.kind, static_cast<double>(t));
    }
    for (const auto& ev : spec.injected) {
        for (std::int64_t w : ev.weeks) {
            const std::int64_t offset = w - spec.start_week;
            if (offset >= 0 && offset < spec.n_weeks) {
                p[static_cast<std::size_t>(offset)] += ev.delta;
            }
        }
    }
    for (auto& v : p) v = clamp01(v);
    return p;
}

} // namespace

GeneratedSeries generate_series(const SynthSpec& spec, const std::string& city,
                                const std::string& signal) {
    GeneratedSeries out;
    out.series.city = city;
    out.series.signal = signal;
    out.true_p = weekly_probabilities(spec);
    Rng rng(spec.seed);
    for (int t = 0; t < spec.n_weeks; ++t) {
        const std::int64_t n = samples_at(spec, t);
        if (n < 1) continue; // zero-sample weeks are gaps
        const double p = out.true_p[static_cast<std::size_t>(t)];
        std::int64_t k;
        if (spec.noise_free) {
            k = std::llround(p * static_cast<double>(n));
        } else {
            k = static_cast<std::int64_t>(rng.binomial(static_cast<std::uint64_t>(n), p));
        }
        out.series.buckets.push_back(make_bucket(spec.start_week + t, k, n));
    }
    return out;
}

std::vector<DetectionRecord> generate_city_detections(const std::string& city,
                                                      const std::vector<CitySynthSignal>& signals,
                                                      std::uint64_t seed) {
    if (signals.empty()) return {};
    const SynthSpec& ref = signals.front().spec;
    std::vector<std::vector<double>> probs;
    std::vector<std::set<std::int64_t>> injected_weeks;
    for (const auto& s : signals) {
        if (s.spec.n_weeks != ref.n_weeks || s.spec.start_week != ref.start_week) {
            throw ContractError("generate_city_detections: signals must share the week grid");
        }
        probs.push_back(weekly_probabilities(s.spec));
        std::set<std::int64_t> weeks;
        for (const auto& ev : s.spec.injected) weeks.insert(ev.weeks.begin(), ev.weeks.end());
        injected_weeks.push_back(std::move(weeks));
    }
    Rng rng(seed);
    std::vector<DetectionRecord> records;
    for (int t = 0; t < ref.n_weeks; ++t) {
        const std::int64_t n = samples_at(ref, t);
        const std::int64_t week = ref.start_week + t;
        const std::string monday = week_start_date(week);
        for (std::int64_t i = 0; i < n; ++i) {
            DetectionRecord rec;
            rec.id = city + "-" + std::to_string(week) + "-" + std::to_string(i);
            rec.city = city;
            rec.year = std::stoi(monday.substr(0, 4));
            rec.month = std::stoi(monday.substr(5, 2));
            rec.day = std::stoi(monday.substr(8, 2));
            std::string tokens;
            bool captioned_positive = false;
            for (std::size_t s = 0; s < signals.size(); ++s) {
                const bool positive =
                    rng.bernoulli(probs[s][static_cast<std::size_t>(t)]);
                rec.attributes[signals[s].signal] = positive;
                if (positive && !signals[s].caption_token.empty()) {
                    captioned_positive = true;
                    if (injected_weeks[s].count(week)) {
                        tokens += signals[s].caption_token + " ";
                    }
                }
            }
            // positives carry a generic caption year-round so event-week
            // terms have a background corpus to stand out against
            if (captioned_positive) {
                rec.caption = tokens + "street photo";
            }
            records.push_back(std::move(rec));
        }
    }
    return records;
}

std::vector<PanelEntry> standard_panel(std::uint64_t seed) {
    const std::array<std::string, 4> cities{"amber", "basalt", "cobalt", "dune"};
    constexpr int kSignals = 25;
    std::vector<PanelEntry> panel;
    panel.reserve(cities.size() * kSignals);
    std::size_t index = 0;
    for (const auto& city : cities) {
        for (int s = 0; s < kSignals; ++s, ++index) {
            Rng rng(derive_seed(seed, index));
            SynthSpec spec;
            spec.kind = ModelKind::full;
            spec.n_weeks = 150 + static_cast<int>(rng.uniform_index(51));
            spec.samples_per_week = {300};
            spec.seed = derive_seed(seed, 1000 + index);
            spec.start_week = 2200;
            ModelParams& p = spec.params;
            // regimes: mostly seasonal surges, some drift-dominated trends,
            // a few very spiky annual signals
            const double regime = rng.uniform();
            if (regime < 0.70) {
                p.r = rng.uniform(0.45, 0.90);
                p.k = rng.uniform(0.8, 6.0);
                p.m_cyc = rng.uniform(0.15, 0.45) * (rng.uniform() < 0.8 ? 1.0 : -1.0);
                p.c_lin = rng.uniform(0.20, 0.50);
                p.m_lin = rng.uniform(-8e-4, 8e-4);
            } else if (regime < 0.90) {
                p.r = rng.uniform(0.0, 0.10);
                p.k = rng.uniform(0.5, 4.0);
                p.m_cyc = rng.uniform(0.05, 0.20);
                p.c_lin = rng.uniform(0.20, 0.60);
                const double slope = rng.uniform(4e-4, 1.2e-3);
                p.m_lin = rng.uniform() < 0.5 ? slope : -slope;
            } else {
                p.r = rng.uniform(0.50, 0.90);
                p.k = rng.uniform(8.0, 15.0);
                p.m_cyc = rng.uniform(0.30, 0.60);
                p.c_lin = rng.uniform(0.10, 0.30);
                p.m_lin = rng.uniform(-4e-4, 4e-4);
            }
            p.omega = kTwoPi / 52.0 * rng.uniform(0.9, 1.1);
            p.phi = rng.uniform(0.0, kTwoPi);
            // keep the noise-free curve inside the open unit interval
            if (p.m_cyc > 0.6) p.m_cyc = 0.6;
            char name[16];
            std::snprintf(name, sizeof(name), "attr%02d", s);
            PanelEntry entry;
            entry.city = city;
            entry.signal = name;
            entry.spec = spec;
            entry.generated = generate_series(spec, city, name);
            panel.push_back(std::move(entry));
        }
    }
    return panel;
}

namespace {

struct SeriesTask {
    const TrendSeries* series = nullptr;
    std::vector<double> train_values;
    std::vector<double> test_values;
    std::map<ModelKind, FitResult> fits; // on the training window
    std::map<std::string, std::vector<double>> predictions;
    bool usable = false;
};

std::vector<double> trend_predictions(const FitResult& fit, const TrendSeries& series,
                                      std::size_t test_begin) {
    std::vector<double> pred;
    pred.reserve(series.buckets.size() - test_begin);
    for (std::size_t i = test_begin; i < series.buckets.size(); ++i) {
        const double t = static_cast<double>(series.buckets[i].week - fit.start_week);
        pred.push_back(std::min(std::max(eval_model(fit.params, fit.kind, t), 0.0), 1.0));
    }
    return pred;
}

} // namespace

EvalReport evaluate_forecasts(const std::vector<TrendSeries>& panel, const EvalOptions& opts) {
    EvalReport report;
    report.horizons = opts.horizons;
    if (report.horizons.empty()) throw ContractError("evaluate_forecasts: no horizons");
    const int max_h = *std::max_element(report.horizons.begin(), report.horizons.end());

    std::vector<SeriesTask> tasks(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i) tasks[i].series = &panel[i];

    const std::size_t min_train =
        std::max(opts.fit.min_weeks, static_cast<std::size_t>(opts.baseline.max_lag + 6));

    parallel_for(
        tasks.size(),
        [&](std::size_t i) {
            SeriesTask& task = tasks[i];
            const TrendSeries& full_series = *task.series;
            if (full_series.buckets.size() < min_train + static_cast<std::size_t>(max_h)) {
                return; // too short; counted below
            }
            const std::size_t test_begin = full_series.buckets.size() -
                                           static_cast<std::size_t>(max_h);
            TrendSeries train = full_series;
            train.buckets.resize(test_begin);
            for (const auto& b : train.buckets) task.train_values.push_back(b.p_hat);
            for (std::size_t j = test_begin; j < full_series.buckets.size(); ++j) {
                task.test_values.push_back(full_series.buckets[j].p_hat);
            }
            task.fits = fit_all_kinds(train, opts.fit);
            for (const auto& [kind, fit] : task.fits) {
                task.predictions[to_string(kind)] =
                    trend_predictions(fit, full_series, test_begin);
            }
            for (BaselineKind bk : {BaselineKind::mean, BaselineKind::last, BaselineKind::AR,
                                    BaselineKind::ES}) {
                const BaselineModel model =
                    fit_baseline(bk, {task.train_values}, opts.baseline);
                task.predictions[to_string(bk)] =
                    forecast_baseline(model, {task.train_values}, max_h);
            }
            task.usable = true;
        },
        opts.threads);

    // VAR runs per city over the usable, week-aligned signals
    if (opts.include_var) {
        std::map<std::string, std::vector<std::size_t>> by_city;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (tasks[i].usable) by_city[tasks[i].series->city].push_back(i);
        }
        for (auto& [city, indices] : by_city) {
            if (indices.size() < 2) continue;
            // VAR couples signals week by week, so the training windows must
            // cover identical week grids, not merely equal lengths
            auto week_grid = [&](std::size_t idx) {
                std::vector<std::int64_t> weeks;
                const auto& buckets = tasks[idx].series->buckets;
                const std::size_t train_len = tasks[idx].train_values.size();
                for (std::size_t j = 0; j < train_len; ++j) weeks.push_back(buckets[j].week);
                return weeks;
            };
            const auto reference = week_grid(indices[0]);
            std::vector<std::size_t> aligned;
            for (std::size_t idx : indices) {
                if (week_grid(idx) == reference) aligned.push_back(idx);
            }
            if (aligned.size() < 2) continue;
            std::vector<std::vector<double>> var_panel;
            for (std::size_t idx : aligned) var_panel.push_back(tasks[idx].train_values);
            try {
                const BaselineModel model = fit_baseline(BaselineKind::VAR, var_panel,
                                                         opts.baseline);
                const auto joint = forecast_baseline(model, var_panel, max_h);
                for (std::size_t s = 0; s < aligned.size(); ++s) {
                    auto& pred = tasks[aligned[s]].predictions["VAR"];
                    pred.assign(joint.begin() + static_cast<std::ptrdiff_t>(
                                                    s * static_cast<std::size_t>(max_h)),
                                joint.begin() + static_cast<std::ptrdiff_t>(
                                                    (s + 1) * static_cast<std::size_t>(max_h)));
                }
            } catch (const InsufficientDataError&) {
                // VAR simply absent for this city
            }
        }
    }

    for (auto& task : tasks) {
        if (!task.usable) {
            ++report.skipped_short;
            continue;
        }
        report.fits.push_back(
            {task.series->city, task.series->signal, std::move(task.fits)});
        for (const auto& [model, pred] : task.predictions) {
            for (int h : report.horizons) {
                const auto hu = static_cast<std::size_t>(h);
                if (pred.size() < hu || task.test_values.size() < hu) continue;
                std::vector<double> p(pred.begin(), pred.begin() + static_cast<std::ptrdiff_t>(hu));
                std::vector<double> tr(task.test_values.begin(),
                                       task.test_values.begin() + static_cast<std::ptrdiff_t>(hu));
                const ForecastMetrics m = forecast_metrics(p, tr);
                EvalCell& cell = report.cells[model][h];
                cell.mae += m.mae;
                cell.mape += m.mape;
                ++cell.n_series;
            }
        }
    }
    for (auto& [model, horizons] : report.cells) {
        for (auto& [h, cell] : horizons) {
            if (cell.n_series > 0) {
                cell.mae /= static_cast<double>(cell.n_series);
                cell.mape /= static_cast<double>(cell.n_series);
            }
        }
    }
    return report;
}

std::string eval_report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "model,horizon,mae,mape,n_series\n";
    for (const auto& [model, horizons] : report.cells) {
        for (const auto& [h, cell] : horizons) {
            out << model << ',' << h << ',' << cell.mae << ',' << cell.mape << ','
                << cell.n_series << '\n';
        }
    }
    return out.str();
}

std::string eval_report_to_json(const EvalReport& report) {
    json j;
    j["horizons"] = report.horizons;
    j["skipped_short"] = report.skipped_short;
    json models = json::object();
    for (const auto& [model, horizons] : report.cells) {
        json per = json::object();
        for (const auto& [h, cell] : horizons) {
            per[std::to_string(h)] = {
                {"mae", cell.mae}, {"mape", cell.mape}, {"n_series", cell.n_series}};
        }
        models[model] = per;
    }
    j["models"] = models;
    return j.dump(2) + "\n";
}

namespace {

bool events_match(const Event& a, const Event& b) {
    if (a.city != b.city || a.signal != b.signal) return false;
    std::set<std::int64_t> weeks(a.weeks.begin(), a.weeks.end());
    return std::any_of(b.weeks.begin(), b.weeks.end(),
                       [&](std::int64_t w) { return weeks.count(w) > 0; });
}

} // namespace

RetentionCurve bootstrap_retention(const std::vector<DetectionRecord>& records,
                                   const RetentionOptions& opts) {
    if (records.empty()) throw InsufficientDataError("bootstrap_retention: no records");
    const auto keys = list_city_signals(records);

    std::vector<std::vector<Event>> per_resample(opts.n_resamples);
    parallel_for(
        opts.n_resamples,
        [&](std::size_t b) {
            Rng rng(derive_seed(opts.seed, b));
            std::vector<DetectionRecord> sample;
            sample.reserve(records.size());
            for (std::size_t i = 0; i < records.size(); ++i) {
                sample.push_back(records[rng.uniform_index(records.size())]);
            }
            std::vector<TrendSeries> series;
            std::vector<FitRecord> fits;
            for (const auto& [city, signal] : keys) {
                TrendSeries s = aggregate_weekly(sample, city, signal, opts.min_total);
                if (s.buckets.size() < opts.fit.min_weeks) continue;
                FitRecord fr;
                fr.city = city;
                fr.signal = signal;
                fr.fit = fit_trend(s, ModelKind::full, opts.fit);
                fits.push_back(std::move(fr));
                series.push_back(std::move(s));
            }
            per_resample[b] = extract_events(series, fits, opts.events);
        },
        opts.threads);

    std::vector<double> thresholds = opts.thresholds;
    if (thresholds.empty()) {
        std::vector<double> saliencies;
        for (const auto& events : per_resample) {
            for (const auto& e : events) saliencies.push_back(e.saliency);
        }
        std::sort(saliencies.begin(), saliencies.end());
        if (saliencies.empty()) {
            thresholds = {1.0};
        } else {
            for (int decile = 0; decile <= 9; ++decile) {
                const std::size_t idx = std::min(
                    saliencies.size() - 1,
                    static_cast<std::size_t>(static_cast<double>(saliencies.size()) * decile /
                                             10.0));
                thresholds.push_back(saliencies[idx]);
            }
            thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                             thresholds.end());
        }
    }

    RetentionCurve curve;
    curve.n_resamples = opts.n_resamples;
    for (double tau : thresholds) {
        RetentionPoint point;
        point.threshold = tau;
        double sum = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < per_resample.size(); ++i) {
            for (std::size_t j = 0; j < per_resample.size(); ++j) {
                if (i == j) continue;
                ++pairs;
                std::size_t above = 0, matched = 0;
                for (const auto& e : per_resample[i]) {
                    if (e.saliency <= tau) continue;
                    ++above;
                    for (const auto& other : per_resample[j]) {
                        if (events_match(e, other)) {
                            ++matched;
                            break;
                        }
                    }
                }
                if (above == 0) {
                    // vacuous pair: retained by definition, but flagged
                    sum += 1.0;
                    ++point.empty_pairs;
                } else {
                    sum += static_cast<double>(matched) / static_cast<double>(above);
                }
            }
        }
        point.retention = pairs > 0 ? sum / static_cast<double>(pairs) : 1.0;
        curve.points.push_back(point);
    }
    return curve;
}

std::string retention_to_csv(const RetentionCurve& curve) {
    std::ostringstream out;
    out << "threshold,retention\n";
    for (const auto& p : curve.points) {
        out << p.threshold << ',' << p.retention << '\n';
    }
    return out.str();
}

RecoveryScore score_event_recovery(const std::vector<Event>& detected,
                                   const std::vector<Event>& injected, double min_saliency) {
    RecoveryScore score;
    std::vector<const Event*> salient;
    for (const auto& e : detected) {
        if (e.saliency >= min_saliency) salient.push_back(&e);
    }
    score.n_detected = salient.size();
    score.n_injected = injected.size();
    std::size_t matched_detected = 0;
    for (const auto* e : salient) {
        for (const auto& truth : injected) {
            if (events_match(*e, truth)) {
                ++matched_detected;
                break;
            }
        }
    }
    std::size_t matched_injected = 0;
    for (const auto& truth : injected) {
        for (const auto* e : salient) {
            if (events_match(*e, truth)) {
                ++matched_injected;
                break;
            }
        }
    }
    score.precision = salient.empty()
                          ? 1.0
                          : static_cast<double>(matched_detected) /
                                static_cast<double>(salient.size());
    score.recall = injected.empty()
                       ? 1.0
                       : static_cast<double>(matched_injected) /
                             static_cast<double>(injected.size());
    return score;
}

} // namespace geostyle
