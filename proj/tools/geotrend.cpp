// geotrend: fit, forecast and explain weekly fashion-attribute trends.
//
// Subcommands: ingest, fit, forecast, evaluate, events, keywords, cluster,
// simulate, phase, retention. Every run writes a manifest next to its
// primary output recording the configuration and input hashes.

#include "geostyle/config.hpp"
#include "geostyle/data.hpp"
#include "geostyle/error.hpp"
#include "geostyle/events.hpp"
#include "geostyle/gmm.hpp"
#include "geostyle/kernels.hpp"
#include "geostyle/keywords.hpp"
#include "geostyle/parallel.hpp"
#include "geostyle/rng.hpp"
#include "geostyle/sha256.hpp"
#include "geostyle/synth.hpp"
#include "geostyle/trend.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace geostyle;

namespace {

constexpr const char* kVersion = "geotrend 0.1.0";

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides; // key=value
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path,
                    "key=value config file (default: $GEOTREND_CONFIG)");
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set alpha=0.01");
    cmd->add_option("--threads", args.threads, "worker threads (0 = hardware)");
    cmd->add_option("--seed", args.seed, "master seed");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg;
    std::string path = args.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("GEOTREND_CONFIG")) path = env;
    }
    if (!path.empty()) cfg = load_config_file(path, cfg);
    for (const auto& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.threads) cfg.threads = *args.threads;
    if (args.seed) cfg.seed = *args.seed;
    kernels::select(cfg.kernels);
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << text;
    if (!f.good()) throw IoError("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

/// Reproducibility manifest written next to the primary output.
void write_manifest(const std::string& primary_out, const std::string& command,
                    const RunConfig& cfg, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json j;
    j["command"] = command;
    j["version"] = kVersion;
    json cfg_json = json::object();
    for (const auto& [k, v] : cfg.to_map()) cfg_json[k] = v;
    j["config"] = cfg_json;
    j["config_hash"] = sha256_hex(cfg_json.dump());
    json in = json::object();
    for (const auto& path : inputs) {
        in[path] = fs::exists(path) ? sha256_file(path) : "missing";
    }
    j["inputs"] = in;
    j["outputs"] = outputs;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    j["timestamp"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    write_text(primary_out + ".manifest.json", j.dump(2) + "\n");
}

std::vector<TrendSeries> load_series(const std::string& input, const std::string& store) {
    if (!input.empty()) return read_series_csv_file(input);
    if (!store.empty()) return read_series_csv_file((fs::path(store) / "series.csv").string());
    throw ParseError("provide --input series.csv or --store DIR");
}

std::string series_source(const std::string& input, const std::string& store) {
    if (!input.empty()) return input;
    return (fs::path(store) / "series.csv").string();
}

std::optional<std::vector<DetectionRecord>> load_store_detections(const std::string& store) {
    if (store.empty()) return std::nullopt;
    const auto path = fs::path(store) / "detections.jsonl";
    if (!fs::exists(path)) return std::nullopt;
    return parse_detections_file(path.string()).records;
}

struct FitBatch {
    std::vector<FitRecord> records;
    std::vector<std::string> failures;
    std::size_t total = 0;
};

FitBatch fit_series_batch(const std::vector<TrendSeries>& series, ModelKind kind,
                          const RunConfig& cfg) {
    FitBatch batch;
    batch.total = series.size();
    std::vector<std::optional<FitRecord>> slots(series.size());
    std::vector<std::string> errors(series.size());
    parallel_for(
        series.size(),
        [&](std::size_t i) {
            try {
                FitRecord rec;
                rec.city = series[i].city;
                rec.signal = series[i].signal;
                if (kind == ModelKind::full) {
                    rec.fit = fit_all_kinds(series[i], cfg.fit).at(ModelKind::full);
                } else {
                    rec.fit = fit_trend(series[i], kind, cfg.fit);
                }
                slots[i] = std::move(rec);
            } catch (const Error& e) {
                errors[i] = series[i].city + "/" + series[i].signal + ": " + e.what();
            }
        },
        cfg.threads);
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i]) {
            batch.records.push_back(std::move(*slots[i]));
        } else {
            batch.failures.push_back(errors[i]);
        }
    }
    return batch;
}

/// Per-item failures are reported; only a >10% failure rate fails the run.
int finish_batch(const FitBatch& batch, const char* what) {
    for (const auto& f : batch.failures) {
        std::cerr << "warning: " << what << " failed for " << f << "\n";
    }
    if (batch.total > 0 && batch.failures.size() * 10 > batch.total) {
        std::cerr << "error: " << batch.failures.size() << "/" << batch.total << " " << what
                  << " items failed\n";
        return 1;
    }
    return 0;
}

std::string plot_csv(const TrendSeries& series, const FitResult& fit) {
    std::ostringstream out;
    out << "week,p_hat,fitted,lo,hi\n";
    for (const auto& b : series.buckets) {
        const double t = static_cast<double>(b.week - fit.start_week);
        const double f = eval_model(fit.params, fit.kind, t);
        out << b.week << ',' << b.p_hat << ',' << f << ',' << (b.p_hat - 1.96 * b.sigma) << ','
            << (b.p_hat + 1.96 * b.sigma) << '\n';
    }
    return out.str();
}

/// Caption documents of one (city, signal): images positive for the signal.
std::vector<CaptionDoc> caption_docs(const std::vector<DetectionRecord>& records,
                                     const std::string& city, const std::string& signal) {
    std::vector<CaptionDoc> docs;
    for (const auto& rec : records) {
        if (rec.city != city || !rec.caption) continue;
        auto it = rec.attributes.find(signal);
        if (it == rec.attributes.end() || !it->second) continue;
        docs.push_back(
            make_caption_doc(rec.id, week_index(rec.year, rec.month, rec.day), *rec.caption));
    }
    return docs;
}

json keyword_report(const Event& event, const std::vector<DetectionRecord>& records,
                    std::size_t top_k) {
    const auto docs = caption_docs(records, event.city, event.signal);
    std::set<std::int64_t> weeks(event.weeks.begin(), event.weeks.end());
    std::vector<CaptionDoc> event_docs, other_docs;
    for (const auto& d : docs) {
        (weeks.count(d.week) ? event_docs : other_docs).push_back(d);
    }
    json rep;
    rep["event_id"] = event.city + ":" + event.signal + ":" + std::to_string(event.weeks.front());
    json kws = json::array();
    if (!event_docs.empty()) {
        for (const auto& score : tfidf_rank(event_docs, other_docs, top_k)) {
            kws.push_back({{"term", score.term},
                           {"tf", score.tf},
                           {"df", score.df},
                           {"score", score.score}});
        }
    }
    rep["keywords"] = kws;
    return rep;
}

int cmd_ingest(const CommonArgs& common, const std::string& detections_path,
               const std::string& series_path, const std::string& store) {
    const RunConfig cfg = resolve_config(common);
    fs::create_directories(store);
    std::vector<std::string> inputs, outputs;
    std::vector<TrendSeries> series;
    if (!detections_path.empty()) {
        auto parsed = parse_detections_file(detections_path);
        inputs.push_back(detections_path);
        if (parsed.skipped > 0) {
            std::cerr << "warning: skipped " << parsed.skipped << " malformed lines\n";
            for (const auto& r : parsed.skip_reasons) std::cerr << "  " << r << "\n";
        }
        const auto det_out = (fs::path(store) / "detections.jsonl").string();
        std::ofstream f(det_out, std::ios::binary);
        if (!f) throw IoError("cannot write " + det_out);
        write_detections(f, parsed.records);
        outputs.push_back("detections.jsonl");
        for (const auto& [city, signal] : list_city_signals(parsed.records)) {
            TrendSeries s = aggregate_weekly(parsed.records, city, signal, cfg.min_total);
            if (!s.buckets.empty()) series.push_back(std::move(s));
        }
    }
    if (!series_path.empty()) {
        auto from_csv = read_series_csv_file(series_path);
        inputs.push_back(series_path);
        series.insert(series.end(), std::make_move_iterator(from_csv.begin()),
                      std::make_move_iterator(from_csv.end()));
    }
    if (series.empty()) throw ParseError("ingest: nothing to ingest");
    const auto series_out = (fs::path(store) / "series.csv").string();
    write_series_csv_file(series_out, series);
    outputs.push_back("series.csv");
    write_manifest(series_out, "ingest", cfg, inputs, outputs);
    std::cout << "ingested " << series.size() << " series into " << store << "\n";
    return 0;
}

int cmd_fit(const CommonArgs& common, const std::string& input, const std::string& store,
            const std::string& model, const std::string& out, const std::string& plot_dir) {
    const RunConfig cfg = resolve_config(common);
    const auto series = load_series(input, store);
    const ModelKind kind = model_kind_from_string(model);
    FitBatch batch = fit_series_batch(series, kind, cfg);
    write_text(out, fit_records_to_json(batch.records));
    std::vector<std::string> outputs{out};
    if (!plot_dir.empty()) {
        std::map<std::pair<std::string, std::string>, const TrendSeries*> by_key;
        for (const auto& s : series) by_key[{s.city, s.signal}] = &s;
        for (const auto& rec : batch.records) {
            const auto* s = by_key.at({rec.city, rec.signal});
            const auto path =
                (fs::path(plot_dir) / (rec.city + "__" + rec.signal + ".csv")).string();
            write_text(path, plot_csv(*s, rec.fit));
            outputs.push_back(path);
        }
    }
    write_manifest(out, "fit", cfg, {series_source(input, store)}, outputs);
    std::cout << "fitted " << batch.records.size() << "/" << batch.total << " series ("
              << to_string(kind) << ")\n";
    return finish_batch(batch, "fit");
}

int cmd_forecast(const CommonArgs& common, const std::string& fits_path,
                 const std::string& input, const std::string& store, int horizon,
                 const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    const auto fits = fit_records_from_json(read_text(fits_path));
    const auto series = load_series(input, store);
    std::map<std::pair<std::string, std::string>, const TrendSeries*> by_key;
    for (const auto& s : series) by_key[{s.city, s.signal}] = &s;
    std::ostringstream csv;
    csv << "city,signal,week,predicted\n";
    for (const auto& rec : fits) {
        FitResult fit = rec.fit;
        auto it = by_key.find({rec.city, rec.signal});
        if (it != by_key.end()) fit.last_week = it->second->buckets.back().week;
        for (const auto& [week, value] : forecast(fit, horizon)) {
            csv << rec.city << ',' << rec.signal << ',' << week << ',' << value << '\n';
        }
    }
    write_text(out, csv.str());
    write_manifest(out, "forecast", cfg, {fits_path, series_source(input, store)}, {out});
    std::cout << "forecast " << fits.size() << " series, horizon " << horizon << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& common, const std::string& input, const std::string& store,
                 const std::vector<int>& horizons, int holdout, const std::string& models,
                 const std::string& out, const std::string& json_out) {
    const RunConfig cfg = resolve_config(common);
    const auto series = load_series(input, store);
    EvalOptions opts;
    if (!horizons.empty()) {
        opts.horizons = horizons;
    } else if (holdout > 0) {
        opts.horizons = holdout > 1 ? std::vector<int>{1, holdout} : std::vector<int>{1};
    }
    opts.fit = cfg.fit;
    opts.baseline = cfg.baseline;
    opts.threads = cfg.threads;
    std::set<std::string> wanted;
    if (!models.empty() && models != "all") {
        std::stringstream ss(models);
        std::string name;
        while (std::getline(ss, name, ',')) wanted.insert(name);
        opts.include_var = wanted.count("VAR") > 0;
    }
    EvalReport report = evaluate_forecasts(series, opts);
    if (!wanted.empty()) {
        for (auto it = report.cells.begin(); it != report.cells.end();) {
            it = wanted.count(it->first) ? std::next(it) : report.cells.erase(it);
        }
    }
    write_text(out, eval_report_to_csv(report));
    std::vector<std::string> outputs{out};
    if (!json_out.empty()) {
        write_text(json_out, eval_report_to_json(report));
        outputs.push_back(json_out);
    }
    write_manifest(out, "evaluate", cfg, {series_source(input, store)}, outputs);
    if (report.skipped_short > 0) {
        std::cerr << "note: skipped " << report.skipped_short << " too-short series\n";
    }
    std::cout << eval_report_to_csv(report);
    return 0;
}

int cmd_events(const CommonArgs& common, const std::string& input, const std::string& store,
               const std::string& fits_path, const std::string& out, std::size_t top_keywords) {
    const RunConfig cfg = resolve_config(common);
    const auto series = load_series(input, store);
    std::vector<FitRecord> fits;
    FitBatch batch;
    if (!fits_path.empty()) {
        fits = fit_records_from_json(read_text(fits_path));
    } else {
        batch = fit_series_batch(series, ModelKind::full, cfg);
        fits = batch.records;
    }
    // only series with a fit participate
    std::set<std::pair<std::string, std::string>> fitted;
    for (const auto& f : fits) fitted.emplace(f.city, f.signal);
    std::vector<TrendSeries> covered;
    for (const auto& s : series) {
        if (fitted.count({s.city, s.signal})) covered.push_back(s);
    }
    const auto events = extract_events(covered, fits, cfg.events);
    write_text(out, events_to_json(events));
    std::vector<std::string> outputs{out};

    const auto detections = load_store_detections(store);
    if (detections) {
        bool any_captions = std::any_of(detections->begin(), detections->end(),
                                        [](const DetectionRecord& r) { return bool(r.caption); });
        if (any_captions) {
            json reports = json::array();
            for (const auto& e : events) {
                try {
                    reports.push_back(keyword_report(e, *detections, top_keywords));
                } catch (const InsufficientDataError&) {
                    // no captions in the event weeks
                }
            }
            const auto kw_out = (fs::path(out).parent_path() /
                                 (fs::path(out).stem().string() + "_keywords.json"))
                                    .string();
            write_text(kw_out, reports.dump(2) + "\n");
            outputs.push_back(kw_out);
        }
    }
    write_manifest(out, "events", cfg, {series_source(input, store)}, outputs);
    std::cout << "extracted " << events.size() << " events\n";
    return finish_batch(batch, "fit");
}

int cmd_keywords(const CommonArgs& common, const std::string& store,
                 const std::string& events_path, const std::string& out, std::size_t top_k) {
    const RunConfig cfg = resolve_config(common);
    const auto detections = load_store_detections(store);
    if (!detections) throw NotFoundError("keywords: store has no detections.jsonl");
    json events = json::parse(read_text(events_path));
    json reports = json::array();
    for (const auto& ej : events) {
        Event e;
        e.city = ej.at("city").get<std::string>();
        e.signal = ej.at("signal").get<std::string>();
        e.weeks = ej.at("weeks").get<std::vector<std::int64_t>>();
        try {
            reports.push_back(keyword_report(e, *detections, top_k));
        } catch (const InsufficientDataError& err) {
            std::cerr << "note: " << e.city << "/" << e.signal << ": " << err.what() << "\n";
        }
    }
    write_text(out, reports.dump(2) + "\n");
    write_manifest(out, "keywords", cfg,
                   {events_path, (fs::path(store) / "detections.jsonl").string()}, {out});
    std::cout << "mined keywords for " << reports.size() << " events\n";
    return 0;
}

int cmd_cluster(const CommonArgs& common, const std::string& store, int k,
                const std::string& city_filter, const std::string& out_model,
                const std::string& out_assign, const std::string& out_series) {
    const RunConfig cfg = resolve_config(common);
    const auto detections = load_store_detections(store);
    if (!detections) throw NotFoundError("cluster: store has no detections.jsonl");
    std::set<std::string> cities;
    for (const auto& rec : *detections) {
        if (rec.embedding && (city_filter.empty() || rec.city == city_filter)) {
            cities.insert(rec.city);
        }
    }
    if (cities.empty()) throw InsufficientDataError("cluster: no records with embeddings");

    json models = json::array();
    std::ostringstream assign_csv;
    assign_csv << "detection_id,cluster,responsibility\n";
    std::vector<TrendSeries> cluster_series;
    std::uint64_t city_index = 0;
    for (const auto& city : cities) {
        std::vector<std::vector<double>> embeddings;
        std::vector<DetectionRecord> city_records;
        for (const auto& rec : *detections) {
            if (rec.city == city && rec.embedding) {
                embeddings.push_back(*rec.embedding);
                city_records.push_back(rec);
            }
        }
        const GmmModel model = fit_gmm(embeddings, k, derive_seed(cfg.seed, city_index++));
        models.push_back(json::parse(gmm_to_json(model, city)));
        for (const auto& a : assign_clusters(model, city_records)) {
            assign_csv << a.detection_id << ',' << a.cluster << ',' << a.responsibility << '\n';
        }
        auto per_city = cluster_trend_series(city_records, model, city);
        cluster_series.insert(cluster_series.end(), per_city.begin(), per_city.end());
    }
    write_text(out_model, models.dump(2) + "\n");
    std::vector<std::string> outputs{out_model};
    if (!out_assign.empty()) {
        write_text(out_assign, assign_csv.str());
        outputs.push_back(out_assign);
    }
    if (!out_series.empty()) {
        std::ostringstream csv;
        write_series_csv(csv, cluster_series);
        write_text(out_series, csv.str());
        outputs.push_back(out_series);
    }
    write_manifest(out_model, "cluster", cfg,
                   {(fs::path(store) / "detections.jsonl").string()}, outputs);
    std::cout << "clustered " << cities.size() << " cities, k=" << k << "\n";
    return 0;
}

int cmd_simulate(const CommonArgs& common, const std::string& out, const std::string& truth_out,
                 const std::string& detections_out, int n_weeks, int samples,
                 const std::string& inject, const std::string& caption_token) {
    const RunConfig cfg = resolve_config(common);
    std::vector<std::string> outputs;
    if (detections_out.empty()) {
        const auto panel = standard_panel(cfg.seed);
        std::vector<TrendSeries> series;
        json truth = json::array();
        for (const auto& entry : panel) {
            series.push_back(entry.generated.series);
            json t;
            t["city"] = entry.city;
            t["signal"] = entry.signal;
            t["params"] = {{"r", entry.spec.params.r},         {"m_cyc", entry.spec.params.m_cyc},
                           {"k", entry.spec.params.k},         {"omega", entry.spec.params.omega},
                           {"phi", entry.spec.params.phi},     {"m_lin", entry.spec.params.m_lin},
                           {"c_lin", entry.spec.params.c_lin}};
            t["n_weeks"] = entry.spec.n_weeks;
            t["start_week"] = entry.spec.start_week;
            truth.push_back(std::move(t));
        }
        write_series_csv_file(out, series);
        outputs.push_back(out);
        if (!truth_out.empty()) {
            write_text(truth_out, truth.dump(2) + "\n");
            outputs.push_back(truth_out);
        }
        write_manifest(out, "simulate", cfg, {}, outputs);
        std::cout << "simulated standard panel: " << series.size() << " series\n";
        return 0;
    }

    // detection-level simulation: one city, one signal, optional injection
    SynthSpec spec;
    spec.params.r = 0.6;
    spec.params.m_cyc = 0.3;
    spec.params.k = 2.0;
    spec.params.omega = 2.0 * 3.14159265358979323846 / 52.0;
    spec.params.phi = 1.0;
    spec.params.m_lin = 2e-4;
    spec.params.c_lin = 0.3;
    spec.n_weeks = n_weeks;
    spec.samples_per_week = {samples};
    spec.seed = derive_seed(cfg.seed, 1);
    if (!inject.empty()) {
        const auto colon = inject.find(':');
        if (colon == std::string::npos) {
            throw ParseError("--inject expects WEEK[+WEEK...]:DELTA");
        }
        InjectedEvent ev;
        std::stringstream weeks(inject.substr(0, colon));
        std::string token;
        while (std::getline(weeks, token, '+')) ev.weeks.push_back(std::stoll(token));
        ev.delta = std::stod(inject.substr(colon + 1));
        spec.injected.push_back(ev);
    }
    CitySynthSignal sig;
    sig.signal = "attr00";
    sig.spec = spec;
    sig.caption_token = caption_token;
    const auto records = generate_city_detections("simcity", {sig}, derive_seed(cfg.seed, 2));
    std::ofstream f(detections_out, std::ios::binary);
    if (!f) throw IoError("cannot write " + detections_out);
    write_detections(f, records);
    f.close();
    outputs.push_back(detections_out);
    const auto series = aggregate_weekly(records, "simcity", "attr00", cfg.min_total);
    write_series_csv_file(out, std::vector<TrendSeries>{series});
    outputs.push_back(out);
    write_manifest(out, "simulate", cfg, {}, outputs);
    std::cout << "simulated " << records.size() << " detections\n";
    return 0;
}

int cmd_phase(const CommonArgs& common, const std::string& fits_path, const std::string& signal,
              const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    auto fits = fit_records_from_json(read_text(fits_path));
    std::vector<FitRecord> selected;
    for (auto& f : fits) {
        if (f.signal == signal) selected.push_back(std::move(f));
    }
    if (selected.empty()) throw NotFoundError("phase: no fits for signal '" + signal + "'");
    const PhaseMatrix matrix = phase_difference_matrix(selected);
    std::ostringstream csv;
    csv << "city";
    for (const auto& c : matrix.cities) csv << ',' << c;
    csv << '\n';
    for (std::size_t i = 0; i < matrix.cities.size(); ++i) {
        csv << matrix.cities[i];
        for (std::size_t j = 0; j < matrix.cities.size(); ++j) {
            csv << ',' << matrix.weeks(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        csv << '\n';
    }
    write_text(out, csv.str());
    write_manifest(out, "phase", cfg, {fits_path}, {out});
    for (const auto& c : matrix.excluded) {
        std::cerr << "note: excluded " << c << " (omega far from annual)\n";
    }
    std::cout << "phase matrix over " << matrix.cities.size() << " cities\n";
    return 0;
}

int cmd_retention(const CommonArgs& common, const std::string& store, std::size_t resamples,
                  const std::vector<double>& thresholds, const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    const auto detections = load_store_detections(store);
    if (!detections) throw NotFoundError("retention: store has no detections.jsonl");
    RetentionOptions opts;
    opts.n_resamples = resamples;
    opts.thresholds = thresholds;
    opts.events = cfg.events;
    opts.fit = cfg.fit;
    opts.min_total = cfg.min_total;
    opts.seed = cfg.seed;
    opts.threads = cfg.threads;
    const RetentionCurve curve = bootstrap_retention(*detections, opts);
    write_text(out, retention_to_csv(curve));
    write_manifest(out, "retention", cfg,
                   {(fs::path(store) / "detections.jsonl").string()}, {out});
    std::cout << retention_to_csv(curve);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"geotrend: weekly trend modeling, event discovery and style clustering"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    CommonArgs common;

    auto* ingest = app.add_subcommand("ingest", "build a store from detections/series");
    std::string in_detections, in_series, store;
    ingest->add_option("--detections", in_detections, "detections JSONL");
    ingest->add_option("--series", in_series, "pre-aggregated series CSV");
    ingest->add_option("--store", store, "store directory")->required();
    add_common(ingest, common);

    auto* fit = app.add_subcommand("fit", "fit trend models per (city, signal)");
    std::string fit_input, fit_store, fit_model = "full", fit_out, fit_plot_dir;
    fit->add_option("--input", fit_input, "series CSV");
    fit->add_option("--store", fit_store, "store directory");
    fit->add_option("--model", fit_model, "linear|sinusoid|sin_plus_lin|cyclic|full");
    fit->add_option("--out", fit_out, "fits JSON")->required();
    fit->add_option("--plot-dir", fit_plot_dir, "write per-series plot CSVs here");
    add_common(fit, common);

    auto* fc = app.add_subcommand("forecast", "forecast fitted series");
    std::string fc_fits, fc_input, fc_store, fc_out;
    int fc_horizon = 26;
    fc->add_option("--fits", fc_fits, "fits JSON")->required();
    fc->add_option("--input", fc_input, "series CSV");
    fc->add_option("--store", fc_store, "store directory");
    fc->add_option("--horizon", fc_horizon, "weeks ahead");
    fc->add_option("--out", fc_out, "forecast CSV")->required();
    add_common(fc, common);

    auto* ev = app.add_subcommand("evaluate", "holdout benchmark of models and baselines");
    std::string ev_input, ev_store, ev_out, ev_json, ev_models = "all";
    std::vector<int> ev_horizons;
    int ev_holdout = 0;
    ev->add_option("--input", ev_input, "series CSV");
    ev->add_option("--store", ev_store, "store directory");
    ev->add_option("--horizons", ev_horizons, "forecast horizons (default 1 26)");
    ev->add_option("--holdout", ev_holdout, "shorthand for --horizons 1 HOLDOUT");
    ev->add_option("--models", ev_models, "all, or a comma-separated subset");
    ev->add_option("--out", ev_out, "report CSV")->required();
    ev->add_option("--json", ev_json, "also write JSON report");
    add_common(ev, common);

    auto* evt = app.add_subcommand("events", "detect and rank events");
    std::string evt_input, evt_store, evt_fits, evt_out;
    std::size_t evt_topk = 5;
    evt->add_option("--input", evt_input, "series CSV");
    evt->add_option("--store", evt_store, "store directory");
    evt->add_option("--fits", evt_fits, "reuse fits JSON (default: fit full model)");
    evt->add_option("--out", evt_out, "events JSON")->required();
    evt->add_option("--top-keywords", evt_topk, "keywords per event when captions exist");
    add_common(evt, common);

    auto* kw = app.add_subcommand("keywords", "mine caption keywords for events");
    std::string kw_store, kw_events, kw_out;
    std::size_t kw_topk = 5;
    kw->add_option("--store", kw_store, "store directory")->required();
    kw->add_option("--events", kw_events, "events JSON")->required();
    kw->add_option("--out", kw_out, "keyword report JSON")->required();
    kw->add_option("--top", kw_topk, "keywords per event");
    add_common(kw, common);

    auto* cl = app.add_subcommand("cluster", "fit per-city style clusters (GMM)");
    std::string cl_store, cl_city, cl_model, cl_assign, cl_series;
    int cl_k = 10;
    cl->add_option("--store", cl_store, "store directory")->required();
    cl->add_option("--k", cl_k, "components per city");
    cl->add_option("--city", cl_city, "restrict to one city");
    cl->add_option("--out-model", cl_model, "models JSON")->required();
    cl->add_option("--out-assign", cl_assign, "assignments CSV");
    cl->add_option("--out-series", cl_series, "cluster trend series CSV");
    add_common(cl, common);

    auto* sim = app.add_subcommand("simulate", "generate synthetic data");
    std::string sim_out, sim_truth, sim_detections, sim_inject, sim_token;
    int sim_weeks = 160, sim_samples = 300;
    sim->add_option("--out", sim_out, "series CSV")->required();
    sim->add_option("--truth", sim_truth, "ground-truth JSON (panel mode)");
    sim->add_option("--detections", sim_detections, "write detection JSONL (record mode)");
    sim->add_option("--weeks", sim_weeks, "weeks (record mode)");
    sim->add_option("--samples", sim_samples, "records per week (record mode)");
    sim->add_option("--inject", sim_inject, "inject WEEK[+WEEK...]:DELTA (record mode)");
    sim->add_option("--caption-token", sim_token, "plant a caption token on injected weeks");
    add_common(sim, common);

    auto* ph = app.add_subcommand("phase", "phase-difference matrix between cities");
    std::string ph_fits, ph_signal, ph_out;
    ph->add_option("--fits", ph_fits, "fits JSON")->required();
    ph->add_option("--signal", ph_signal, "attribute name")->required();
    ph->add_option("--out", ph_out, "matrix CSV")->required();
    add_common(ph, common);

    auto* ret = app.add_subcommand("retention", "bootstrap event retention curve");
    std::string ret_store, ret_out;
    std::size_t ret_resamples = 20;
    std::vector<double> ret_thresholds;
    ret->add_option("--store", ret_store, "store directory")->required();
    ret->add_option("--resamples", ret_resamples, "bootstrap resamples");
    ret->add_option("--thresholds", ret_thresholds, "saliency thresholds (default: deciles)");
    ret->add_option("--out", ret_out, "retention CSV")->required();
    add_common(ret, common);

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(common, in_detections, in_series, store);
        if (fit->parsed())
            return cmd_fit(common, fit_input, fit_store, fit_model, fit_out, fit_plot_dir);
        if (fc->parsed())
            return cmd_forecast(common, fc_fits, fc_input, fc_store, fc_horizon, fc_out);
        if (ev->parsed())
            return cmd_evaluate(common, ev_input, ev_store, ev_horizons, ev_holdout, ev_models,
                                ev_out, ev_json);
        if (evt->parsed())
            return cmd_events(common, evt_input, evt_store, evt_fits, evt_out, evt_topk);
        if (kw->parsed()) return cmd_keywords(common, kw_store, kw_events, kw_out, kw_topk);
        if (cl->parsed())
            return cmd_cluster(common, cl_store, cl_k, cl_city, cl_model, cl_assign, cl_series);
        if (sim->parsed())
            return cmd_simulate(common, sim_out, sim_truth, sim_detections, sim_weeks,
                                sim_samples, sim_inject, sim_token);
        if (ph->parsed()) return cmd_phase(common, ph_fits, ph_signal, ph_out);
        if (ret->parsed())
            return cmd_retention(common, ret_store, ret_resamples, ret_thresholds, ret_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
