#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace dpr {

inline constexpr int kNoise = -1;

struct DbscanParams {
    double eps = 0.0;
    int min_pts = 3;
    // false: core iff |N_eps(x)| >= min_pts; true: strictly greater.
    bool core_strict = false;

    void validate() const;
};

struct ClusterModel {
    DbscanParams params;
    std::vector<int> labels;   // kNoise or 0..k-1
    std::vector<bool> core;
    int k = 0;
    std::optional<double> sc;  // undefined unless k >= 2 and some cluster has >= 2 members
    double sse = 0.0;

    std::size_t noise_count() const;
};

/// Indices j with ||points[i] - points[j]|| <= eps, ascending, i included.
std::vector<Eigen::Index> region_query(const Eigen::MatrixXd& points, Eigen::Index i, double eps);

/// Density-based clustering over the rows of `points` (Euclidean metric).
///
/// Clusters are the connected components of core points under the eps
/// relation. A non-core point within eps of a core joins that core's
/// cluster; when cores from several clusters qualify, the core with the
/// smallest row index wins. Cluster ids are assigned in order of first row
/// occurrence so the labeling is a pure function of the row order.
/// `sc` and `sse` are filled in.
ClusterModel dbscan(const Eigen::MatrixXd& points, const DbscanParams& params);

/// Mean silhouette over non-noise points. Members of singleton clusters
/// score 0, as do points with a = b = 0. Throws InputError when fewer than
/// two clusters remain after removing noise.
double silhouette_sc(const Eigen::MatrixXd& points, const std::vector<int>& labels);

/// Within-cluster sum of squared distances to cluster centroids; noise rows
/// contribute nothing.
double sse(const Eigen::MatrixXd& points, const std::vector<int>& labels);

/// Distance from each point to its k-th nearest other point, descending.
std::vector<double> k_distance_profile(const Eigen::MatrixXd& points, int k);

/// `count` eps values spaced evenly from the `lo` to the `hi` quantile of
/// the (min_pts - 1)-distance profile, ascending. With lo = 0.95 every
/// candidate leaves about 5% of the points or fewer without a dense
/// neighbourhood, the usual reading of the k-distance plot.
std::vector<double> k_distance_eps_grid(const Eigen::MatrixXd& points, int min_pts, double lo, double hi, int count);

struct ScanRow {
    double eps = 0.0;
    int min_pts = 0;
    int k = 0;
    std::size_t noise = 0;
    std::optional<double> sc;
    double sse = 0.0;
};

/// One row per (eps, min_pts) pair, eps-major in grid order. `threads` > 1
/// evaluates cells concurrently; the table is identical either way.
std::vector<ScanRow> scan_params(const Eigen::MatrixXd& points, const std::vector<double>& eps_grid,
                                 const std::vector<int>& min_pts_grid, bool core_strict = false,
                                 unsigned threads = 1);

/// Row with the largest defined SC, if any. Ties go to fewer noise points,
/// then to the larger eps (same partition, wider reach for unseen rows),
/// then to the earlier row.
std::optional<std::size_t> best_scan_row(const std::vector<ScanRow>& rows);

/// Labels for rows not seen during clustering: the cluster of the nearest
/// core point of `train` within eps (lowest index on distance ties), else
/// kNoise.
std::vector<int> assign_to_clusters(const ClusterModel& model, const Eigen::MatrixXd& train_points,
                                    const Eigen::MatrixXd& new_points);

}  // namespace dpr
