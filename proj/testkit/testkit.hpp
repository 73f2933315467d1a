#pragma once

// Synthetic panels and reference implementations used to check the dpr
// library. Nothing here calls into the production solvers or clustering.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpr/clustering.hpp"
#include "dpr/data_model.hpp"
#include "dpr/penalized.hpp"

namespace dpr::testkit {

// ---------------------------------------------------------------------------
// Synthetic panels

/// Entity e belongs to cluster e % n_clusters. Its mix is the cluster
/// profile plus `mix_jitter` noise, renormalized. Each feature value is
///   scale_e * exp(growth_e * t) * mix_ej * exp(cell_sd * z)
/// and the target is exp(y) - 1 with
///   y = intercept + sum_j beta_j * ln(x_j + 1) + offset_c + noise_sd * z,
/// so ln(target + 1) is linear in the log features plus a cluster offset.
///
/// A column j with copy_of[j] = s >= 0 repeats column s exactly before
/// period index `copy_split_period` and as s * exp(copy_drift_sd * z) from
/// then on. Copy columns take no share of their own (profile entry 0).
struct SyntheticSpec {
    int n_entities = 12;
    int n_periods = 10;
    int n_features = 3;
    int n_clusters = 3;
    std::vector<std::vector<double>> mix_profiles;  // n_clusters rows summing to 1
    std::vector<double> true_coefficients;          // n_features
    std::vector<double> cluster_offsets;            // n_clusters; empty = zeros
    double intercept = 2.0;
    double noise_sd = 0.01;
    double mix_jitter = 0.0;
    double cell_sd = 0.02;
    double scale_log_mean = 6.0;
    double scale_log_sd = 1.0;
    double growth = 0.03;
    double growth_sd = 0.01;
    std::vector<int> copy_of;  // empty = no copies
    int copy_split_period = 0;
    double copy_drift_sd = 0.0;
    int first_period = 2000;
    std::uint64_t seed = 1;

    /// Throws InputError when shapes disagree or profiles do not sum to 1.
    void validate() const;
};

struct SyntheticPanel {
    PanelDataset data;              // source units, canonical order
    std::vector<int> labels;        // planted cluster of each observation
    std::vector<int> entity_cluster;
    Eigen::VectorXd coefficients;   // on ln(x + 1) features
    std::vector<double> offsets;
};

SyntheticPanel generate_panel(const SyntheticSpec& spec);

/// Profiles with share `(1 - h) / d + h` on feature c % d and
/// `(1 - h) / d` elsewhere; profiles sit h * sqrt(2) apart.
std::vector<std::vector<double>> dominant_profiles(int n_clusters, int n_features, double h);

/// Six well-separated clusters: centre distance is `separation` times the
/// RMS distance of rows to their cluster centre.
SyntheticSpec six_cluster_spec(std::uint64_t seed = 7, double separation = 5.0);

/// 46 entities x 20 periods x 16 features with 16 planted clusters. The
/// features form 7 groups (sizes 3,3,2,2,2,2,2): the 7 base columns come
/// first and each later column copies one of them exactly up to period
/// index 12, after which the copies drift apart. Every member of a group
/// carries an equal share of the group's coefficient. All log features
/// also share a strong entity-scale component.
SyntheticSpec collinear_spec(std::uint64_t seed = 11);

/// key = value lines; `preset = six_cluster|collinear` first selects a base
/// (with the preset's default seed unless `seed` is given).
/// Vectors are comma separated, profile rows separated by ';'.
SyntheticSpec parse_synthetic_spec(std::istream& in);
SyntheticSpec parse_synthetic_spec_file(const std::string& path);

void dump_panel_csv(const std::string& path, const PanelDataset& data);

// ---------------------------------------------------------------------------
// Clustering oracles

/// Labels from the literal definitions: core points by counting, clusters as
/// the transitive closure of direct density-reachability among cores. A
/// border point joins the cluster of its lowest-index core neighbour; ids
/// follow first row occurrence.
std::vector<int> brute_force_dbscan(const Eigen::MatrixXd& points, const DbscanParams& params);

/// True if the two labelings induce the same partition (noise compared as noise).
bool same_partition(const std::vector<int>& a, const std::vector<int>& b);

/// Standard adjusted Rand index; every distinct label, noise included, is a block.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

double naive_silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels);
double naive_sse(const Eigen::MatrixXd& points, const std::vector<int>& labels);
std::vector<double> naive_k_distance(const Eigen::MatrixXd& points, int k);
std::vector<Eigen::Index> naive_region(const Eigen::MatrixXd& points, Eigen::Index i, double eps);

// ---------------------------------------------------------------------------
// Regression oracles

struct ReferenceSolution {
    double intercept = 0.0;
    Eigen::VectorXd beta;
    double objective = 0.0;
};

/// Exact minimizer of (1/N) RSS + lambda (alpha |b|_1 + (1 - alpha) |b|_2^2)
/// with a free intercept. alpha > 0: every sign pattern over the p columns
/// is solved in closed form and the best sign-consistent candidate kept.
/// alpha = 0: augmented least squares by QR. Needs p <= 12.
ReferenceSolution reference_objective_min(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                                          double alpha);

/// Penalized objective evaluated directly from its definition.
double reference_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double intercept,
                           const Eigen::VectorXd& beta, double lambda, double alpha);

/// Per-coordinate optimality violation. With g_j = (2/N) x_j^T r - 2 lambda (1 - alpha) b_j:
/// |g_j - lambda alpha sign(b_j)| for b_j != 0, else max(0, |g_j| - lambda alpha).
/// Columns flagged in `skip` report 0.
Eigen::VectorXd kkt_violation(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double intercept,
                              const Eigen::VectorXd& beta, double lambda, double alpha,
                              const std::vector<bool>& skip = {});

/// Random regression instance with correlated columns.
struct RegressionInstance {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};
RegressionInstance random_regression(int n, int p, std::uint64_t seed);

}  // namespace dpr::testkit
