#pragma once

#include "geostyle/data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace geostyle {

/// Diagonal-covariance Gaussian mixture fitted by EM.
struct GmmModel {
    int n_components = 0;
    std::size_t dim = 0;
    std::vector<double> weights;                // simplex
    std::vector<std::vector<double>> means;     // per component
    std::vector<std::vector<double>> variances; // per component, diagonal
    bool converged = false;
    double final_log_likelihood = 0.0;
    std::vector<double> log_likelihood_history; // one entry per EM iteration
};

struct ClusterAssignment {
    std::string detection_id;
    int cluster = 0;
    double responsibility = 0.0; // of the argmax component
};

struct GmmOptions {
    double tol = 1e-6;          // stop when the log-likelihood gain drops below
    int max_iter = 200;
    double variance_floor = 1e-6;
};

/// EM with seeded k-means++ initialization. Deterministic given (data, k,
/// seed). Requires at least 10*k points; throws DegenerateInputError when all
/// points are identical.
GmmModel fit_gmm(const std::vector<std::vector<double>>& embeddings, int k,
                 std::uint64_t seed, const GmmOptions& opts = {});

/// Log-density of x under the mixture plus per-component responsibilities.
double gmm_log_density(const GmmModel& model, const std::vector<double>& x,
                       std::vector<double>* responsibilities = nullptr);

/// Hard assignment of each embedding-bearing record.
std::vector<ClusterAssignment> assign_clusters(const GmmModel& model,
                                               const std::vector<DetectionRecord>& records);

/// Weekly share of each style cluster among a city's detections: bucket
/// (count assigned to the cluster, total detections that week). Output feeds
/// the trend/event pipeline unchanged; signals are named "cluster-<i>".
std::vector<TrendSeries> cluster_trend_series(const std::vector<DetectionRecord>& records,
                                              const GmmModel& model, const std::string& city);

std::string gmm_to_json(const GmmModel& model, const std::string& city);
GmmModel gmm_from_json(const std::string& text);

} // namespace geostyle
