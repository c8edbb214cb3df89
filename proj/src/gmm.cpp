#include "geostyle/gmm.hpp"

#include "geostyle/error.hpp"
#include "geostyle/kernels.hpp"
#include "geostyle/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

using json = nlohmann::json;

namespace geostyle {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

/// log N(x | mu, diag(var)) given precomputed inv_var and log|Sigma|.
double component_log_density(const std::vector<double>& x, const std::vector<double>& mu,
                             const std::vector<double>& inv_var, double log_det) {
    const double sq = kernels::active().sq_mahalanobis_diag(x.data(), mu.data(),
                                                            inv_var.data(), x.size());
    return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + log_det + sq);
}

struct Precomputed {
    std::vector<std::vector<double>> inv_var;
    std::vector<double> log_det;
    std::vector<double> log_weight;
};

Precomputed precompute(const GmmModel& m) {
    Precomputed pc;
    pc.inv_var.resize(static_cast<std::size_t>(m.n_components));
    pc.log_det.resize(static_cast<std::size_t>(m.n_components));
    pc.log_weight.resize(static_cast<std::size_t>(m.n_components));
    for (int j = 0; j < m.n_components; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        pc.inv_var[ju].resize(m.dim);
        double log_det = 0.0;
        for (std::size_t d = 0; d < m.dim; ++d) {
            pc.inv_var[ju][d] = 1.0 / m.variances[ju][d];
            log_det += std::log(m.variances[ju][d]);
        }
        pc.log_det[ju] = log_det;
        pc.log_weight[ju] = std::log(m.weights[ju]);
    }
    return pc;
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
std::vector<std::vector<double>> kmeanspp_centers(const std::vector<std::vector<double>>& xs,
                                                  int k, Rng& rng) {
    const std::size_t n = xs.size();
    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<std::size_t>(k));
    centers.push_back(xs[rng.uniform_index(n)]);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::vector<double> ones(xs[0].size(), 1.0);
    while (centers.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dist = kernels::active().sq_mahalanobis_diag(
                xs[i].data(), centers.back().data(), ones.data(), xs[i].size());
            d2[i] = std::min(d2[i], dist);
            total += d2[i];
        }
        if (total <= 0.0) {
            throw DegenerateInputError(
                "fit_gmm: fewer distinct points than requested components");
        }
        double target = rng.uniform() * total;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            target -= d2[i];
            if (target <= 0.0) {
                pick = i;
                break;
            }
        }
        centers.push_back(xs[pick]);
    }
    return centers;
}

} // namespace

GmmModel fit_gmm(const std::vector<std::vector<double>>& embeddings, int k, std::uint64_t seed,
                 const GmmOptions& opts) {
    if (k < 1) throw ContractError("fit_gmm: k must be >= 1");
    const std::size_t n = embeddings.size();
    if (n < static_cast<std::size_t>(10 * k)) {
        throw InsufficientDataError("fit_gmm: need at least " + std::to_string(10 * k) +
                                    " points for k=" + std::to_string(k) + ", have " +
                                    std::to_string(n));
    }
    const std::size_t dim = embeddings[0].size();
    if (dim == 0) throw ContractError("fit_gmm: zero-dimensional embeddings");
    for (const auto& x : embeddings) {
        if (x.size() != dim) throw ContractError("fit_gmm: embedding dimensions differ");
    }
    const bool all_same = std::all_of(embeddings.begin(), embeddings.end(),
                                      [&](const auto& x) { return x == embeddings[0]; });
    if (all_same) throw DegenerateInputError("fit_gmm: all embedding vectors are identical");

    // global moments seed the variances and floor
    std::vector<double> global_mean(dim, 0.0), global_var(dim, 0.0);
    for (const auto& x : embeddings) {
        kernels::active().axpy(1.0, x.data(), global_mean.data(), dim);
    }
    for (auto& v : global_mean) v /= static_cast<double>(n);
    for (const auto& x : embeddings) {
        kernels::active().weighted_centered_sq_accum(1.0, x.data(), global_mean.data(),
                                                     global_var.data(), dim);
    }
    for (auto& v : global_var) {
        v = std::max(v / static_cast<double>(n), opts.variance_floor);
    }

    GmmModel model;
    model.n_components = k;
    model.dim = dim;
    Rng rng(seed);
    model.means = kmeanspp_centers(embeddings, k, rng);
    model.weights.assign(static_cast<std::size_t>(k), 1.0 / static_cast<double>(k));
    model.variances.assign(static_cast<std::size_t>(k), global_var);

    const auto ku = static_cast<std::size_t>(k);
    std::vector<double> resp(n * ku);
    std::vector<double> log_p(ku);

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        // E step
        const Precomputed pc = precompute(model);
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double max_lp = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < ku; ++j) {
                log_p[j] = pc.log_weight[j] + component_log_density(embeddings[i], model.means[j],
                                                                    pc.inv_var[j], pc.log_det[j]);
                max_lp = std::max(max_lp, log_p[j]);
            }
            double denom = 0.0;
            for (std::size_t j = 0; j < ku; ++j) denom += std::exp(log_p[j] - max_lp);
            ll += max_lp + std::log(denom);
            for (std::size_t j = 0; j < ku; ++j) {
                resp[i * ku + j] = std::exp(log_p[j] - max_lp) / denom;
            }
        }
        model.log_likelihood_history.push_back(ll);
        if (ll - prev_ll < opts.tol && iter > 0) {
            model.converged = true;
            model.final_log_likelihood = ll;
            break;
        }
        prev_ll = ll;
        model.final_log_likelihood = ll;

        // M step
        for (std::size_t j = 0; j < ku; ++j) {
            double nj = 0.0;
            for (std::size_t i = 0; i < n; ++i) nj += resp[i * ku + j];
            nj = std::max(nj, 1e-12);
            std::vector<double> mean(dim, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                kernels::active().axpy(resp[i * ku + j], embeddings[i].data(), mean.data(), dim);
            }
            for (auto& v : mean) v /= nj;
            std::vector<double> var(dim, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                kernels::active().weighted_centered_sq_accum(resp[i * ku + j],
                                                             embeddings[i].data(), mean.data(),
                                                             var.data(), dim);
            }
            for (auto& v : var) v = std::max(v / nj, opts.variance_floor);
            model.weights[j] = nj / static_cast<double>(n);
            model.means[j] = std::move(mean);
            model.variances[j] = std::move(var);
        }
        // renormalize against accumulated rounding
        double wsum = 0.0;
        for (double w : model.weights) wsum += w;
        for (auto& w : model.weights) w /= wsum;
    }
    return model;
}

double gmm_log_density(const GmmModel& model, const std::vector<double>& x,
                       std::vector<double>* responsibilities) {
    if (x.size() != model.dim) {
        throw ContractError("gmm_log_density: vector dimension " + std::to_string(x.size()) +
                            " != model dimension " + std::to_string(model.dim));
    }
    const Precomputed pc = precompute(model);
    const auto ku = static_cast<std::size_t>(model.n_components);
    std::vector<double> log_p(ku);
    double max_lp = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < ku; ++j) {
        log_p[j] = pc.log_weight[j] +
                   component_log_density(x, model.means[j], pc.inv_var[j], pc.log_det[j]);
        max_lp = std::max(max_lp, log_p[j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < ku; ++j) denom += std::exp(log_p[j] - max_lp);
    if (responsibilities) {
        responsibilities->resize(ku);
        for (std::size_t j = 0; j < ku; ++j) {
            (*responsibilities)[j] = std::exp(log_p[j] - max_lp) / denom;
        }
    }
    return max_lp + std::log(denom);
}

std::vector<ClusterAssignment> assign_clusters(const GmmModel& model,
                                               const std::vector<DetectionRecord>& records) {
    std::vector<ClusterAssignment> out;
    std::vector<double> resp;
    for (const auto& rec : records) {
        if (!rec.embedding) continue;
        gmm_log_density(model, *rec.embedding, &resp);
        const auto arg = static_cast<int>(std::max_element(resp.begin(), resp.end()) -
                                          resp.begin());
        out.push_back({rec.id, arg, resp[static_cast<std::size_t>(arg)]});
    }
    return out;
}

std::vector<TrendSeries> cluster_trend_series(const std::vector<DetectionRecord>& records,
                                              const GmmModel& model, const std::string& city) {
    std::vector<const DetectionRecord*> city_records;
    for (const auto& rec : records) {
        if (rec.city == city && rec.embedding) city_records.push_back(&rec);
    }
    // week -> per-cluster count and total
    std::map<std::int64_t, std::pair<std::vector<std::int64_t>, std::int64_t>> weekly;
    std::vector<double> resp;
    for (const auto* rec : city_records) {
        gmm_log_density(model, *rec->embedding, &resp);
        const auto arg = static_cast<std::size_t>(std::max_element(resp.begin(), resp.end()) -
                                                  resp.begin());
        auto& [counts, total] = weekly[week_index(rec->year, rec->month, rec->day)];
        counts.resize(static_cast<std::size_t>(model.n_components), 0);
        ++counts[arg];
        ++total;
    }
    std::vector<TrendSeries> out;
    for (int cluster = 0; cluster < model.n_components; ++cluster) {
        TrendSeries s;
        s.city = city;
        s.signal = "cluster-" + std::to_string(cluster);
        for (const auto& [week, entry] : weekly) {
            s.buckets.push_back(
                make_bucket(week, entry.first[static_cast<std::size_t>(cluster)], entry.second));
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string gmm_to_json(const GmmModel& model, const std::string& city) {
    json j;
    j["city"] = city;
    j["k"] = model.n_components;
    j["dim"] = model.dim;
    j["weights"] = model.weights;
    j["means"] = model.means;
    j["variances"] = model.variances;
    return j.dump(2) + "\n";
}

GmmModel gmm_from_json(const std::string& text) {
    json j = json::parse(text);
    GmmModel m;
    m.n_components = j.at("k").get<int>();
    m.dim = j.at("dim").get<std::size_t>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.means = j.at("means").get<std::vector<std::vector<double>>>();
    m.variances = j.at("variances").get<std::vector<std::vector<double>>>();
    m.converged = true;
    return m;
}

} // namespace geostyle
