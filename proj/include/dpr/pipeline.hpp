#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpr/clustering.hpp"
#include "dpr/data_model.hpp"
#include "dpr/penalized.hpp"

namespace dpr {

enum class OutlierPolicy { UniqueDummy, Exclude };
enum class FoldMode { RowBlocks, PeriodBlocks };

std::string to_string(OutlierPolicy p);
OutlierPolicy parse_outlier_policy(const std::string& s);
std::string to_string(FoldMode m);
FoldMode parse_fold_mode(const std::string& s);

// ---------------------------------------------------------------------------
// Cluster dummies

/// Column layout of the cluster indicator block appended to a design.
struct DummyLayout {
    int k = 0;
    int baseline = 0;
    std::vector<int> cluster_columns;        // cluster id for each cluster dummy, ascending
    std::vector<Eigen::Index> noise_rows;    // training row owning each singleton dummy

    std::size_t width() const { return cluster_columns.size() + noise_rows.size(); }
    std::vector<std::string> column_names() const;
};

struct AugmentedDesign {
    DesignMatrix design;
    DummyLayout layout;
    std::vector<Eigen::Index> kept_rows;     // input rows present in `design`, in order
    std::vector<Eigen::Index> dropped_rows;  // NOISE rows removed under OutlierPolicy::Exclude
};

/// Appends a 0/1 column for every non-baseline cluster. NOISE rows get a
/// singleton column each (UniqueDummy) or are dropped (Exclude). With k = 0
/// there is no baseline and `baseline` is ignored.
AugmentedDesign augment_with_dummies(const DesignMatrix& dm, const std::vector<int>& labels, OutlierPolicy policy,
                                     int baseline);

/// Indicator block for rows outside the training set. Singleton noise
/// columns are always 0 here.
Eigen::MatrixXd dummy_block(const DummyLayout& layout, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Chronological split

struct SplitSpec {
    std::vector<std::string> train_periods;
    std::vector<std::string> test_periods;
    int cv_folds = 5;

    /// Last `n_test` periods of `data` form the test side.
    static SplitSpec last_periods(const PanelDataset& data, std::size_t n_test, int cv_folds = 5);
};

std::pair<PanelDataset, PanelDataset> chronological_split(const PanelDataset& data, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Cross-validation

struct CvOptions {
    int folds = 5;
    FoldMode mode = FoldMode::RowBlocks;
    std::vector<std::size_t> row_periods;  // period index per design row; needed for PeriodBlocks
    SolverOptions solver;
    unsigned threads = 1;
};

struct CvCell {
    double lambda = 0.0;
    double alpha = 0.0;
    double mean_mse = 0.0;
    double mean_r2 = 0.0;  // averaged over folds where R^2 is defined; NaN if none
    std::vector<double> fold_mse;
    bool failed = false;
    std::string error;
};

struct CvResult {
    double best_lambda = 0.0;
    double best_alpha = 0.0;
    std::size_t best_index = 0;
    std::vector<CvCell> table;
};

/// Fold membership for `n` rows: contiguous row blocks, or contiguous blocks
/// of periods. Returns the fold id of each row.
std::vector<int> assign_folds(std::size_t n, const CvOptions& opts);

/// Grid search by k-fold CV. Ridge ignores alpha_grid (alpha = 0), Lasso
/// uses alpha = 1. Winner: lowest mean MSE, ties to larger lambda, then
/// larger alpha. Cells whose fit fails numerically are kept in the table as
/// failed and never win. Within each (alpha, fold) the lambda grid is walked
/// from largest to smallest with warm starts.
CvResult cross_validate(const DesignMatrix& train, PenaltyKind kind, const std::vector<double>& lambda_grid,
                        const std::vector<double>& alpha_grid, const CvOptions& opts);

// ---------------------------------------------------------------------------
// Forecast summary

struct ForecastRow {
    std::string entity;
    std::string period;
    int cluster = kNoise;
    double predicted_log = 0.0;
    std::optional<double> actual_log;
    double predicted_source = 0.0;
    std::optional<double> actual_source;
    std::optional<double> relative_error;  // |pred - actual| / actual, source units
};

struct ForecastSummary {
    std::size_t n_scored = 0;
    double mean_error = 0.0;      // mean of (predicted - actual), log units
    double error_variance = 0.0;  // population variance of the same differences
    std::optional<double> mse;
    std::optional<double> r2;
    std::optional<double> mean_relative_error;
};

/// Relative deviation in source units of a (predicted, actual) pair given
/// in log units.
double source_relative_error(double predicted_log, double actual_log, const TransformSpec& spec);

ForecastSummary summarize_forecast(const std::vector<ForecastRow>& rows);

/// Rows aligned with `test` observations. `predicted_log` holds one
/// prediction per observation; actuals come from the (log-scale) targets.
std::vector<ForecastRow> forecast_report(const Eigen::VectorXd& predicted_log, const PanelDataset& test_log,
                                         const std::vector<int>& clusters, const TransformSpec& transform);

// ---------------------------------------------------------------------------
// Full pipeline

/// Eps grid taken from the k-distance profile of the training rows; see
/// k_distance_eps_grid. The first min_pts grid value sets k.
struct EpsQuantiles {
    double lo = 0.95;
    double hi = 1.0;
    int count = 20;
};

struct DprConfig {
    TransformSpec transform;
    bool use_clusters = true;
    std::optional<DbscanParams> dbscan;  // when unset, chosen by scan_params over the grids
    std::vector<double> eps_grid;
    std::optional<EpsQuantiles> eps_quantiles;  // used when eps_grid is empty
    std::vector<int> min_pts_grid{3};
    bool core_strict = false;
    PenaltyKind penalty_kind = PenaltyKind::ElasticNet;
    std::vector<double> lambda_grid;
    std::vector<double> alpha_grid;
    OutlierPolicy outlier_policy = OutlierPolicy::UniqueDummy;
    int baseline_cluster = 0;
    int cv_folds = 5;
    FoldMode fold_mode = FoldMode::RowBlocks;
    std::size_t validation_periods = 0;  // trailing train periods held out for a validation score
    SolverOptions solver;
    unsigned threads = 1;
    bool refit_clusters_full = false;

    /// Fills empty grids with defaults for the penalty kind and checks
    /// ranges. Throws InputError.
    void finalize();
};

/// Everything derived from the training rows. Building it never looks at
/// test rows.
struct TrainingArtifacts {
    PanelDataset train_log;                 // log-transformed training panel
    Eigen::MatrixXd cluster_points;         // mix features of training rows
    std::map<std::string, std::vector<double>> entity_max;
    std::vector<ScanRow> scan;              // empty when eps was given
    ClusterModel clusters;
    AugmentedDesign augmented;              // before standardization
    DesignMatrix design;                    // standardized, rows = augmented.kept_rows
    CvResult cv;
    FittedModel model;
    std::vector<FittedModel> path;          // at the chosen alpha over the lambda grid
    std::vector<double> path_lambdas;
};

/// prepare_training, tune_penalty, fit_final at the CV winner, compute_path.
TrainingArtifacts train_dpr(const PanelDataset& train_source, const DprConfig& config);

// The stages of train_dpr, callable one at a time.

struct TrainingClusters {
    Eigen::MatrixXd points;  // mix features
    std::map<std::string, std::vector<double>> entity_max;
    std::vector<ScanRow> scan;  // empty when eps was given
    ClusterModel model;
};

/// Mix features and DBSCAN of the training rows, with the configured
/// (eps, min_pts) or the best pair of a scan. Targets are not needed.
TrainingClusters cluster_training(const PanelDataset& train_source, const DprConfig& config);

/// Transform, mix features, clustering (fixed or scanned) and the
/// standardized dummy-augmented design.
TrainingArtifacts prepare_training(const PanelDataset& train_source, const DprConfig& config);
/// Fills art.cv.
void tune_penalty(TrainingArtifacts& art, const DprConfig& config);
/// Fills art.model; throws NumericalError if the solver does not converge.
void fit_final(TrainingArtifacts& art, const DprConfig& config, const PenaltySpec& penalty);
/// Fills art.path over the distinct lambda grid values, largest first.
/// lambda = 0 is left off when the design is rank deficient.
void compute_path(TrainingArtifacts& art, const DprConfig& config, double alpha);

/// The part of a training run needed to score new rows: transform, the
/// core points that assign clusters, the dummy layout and the fitted model.
struct PipelineModel {
    TransformSpec transform;
    bool use_clusters = true;
    std::vector<std::string> feature_names;
    std::map<std::string, std::vector<double>> entity_max;
    DbscanParams dbscan;
    Eigen::MatrixXd core_points;
    std::vector<int> core_labels;
    DummyLayout layout;
    FittedModel model;
};

PipelineModel make_pipeline_model(const TrainingArtifacts& art, const DprConfig& config);

/// Cluster labels, design rows (source scale) and predictions for rows the
/// model was not trained on.
struct ScoredRows {
    std::vector<int> clusters;
    Eigen::MatrixXd design_rows;
    Eigen::VectorXd predicted_log;
};

ScoredRows score_rows(const PipelineModel& pm, const PanelDataset& rows_source);
ScoredRows score_rows(const TrainingArtifacts& art, const DprConfig& config, const PanelDataset& rows_source);

struct StageMetrics {
    std::size_t n = 0;
    double r2 = 0.0;  // NaN when undefined
    double mse = 0.0;
    double sparsity = 0.0;
};

struct FittedRow {
    std::string entity;
    std::string period;
    int cluster = kNoise;
    double actual = 0.0;
    double fitted = 0.0;
    double residual = 0.0;
};

/// Log-scale actual and fitted value of every training row kept in the design.
std::vector<FittedRow> fitted_rows(const TrainingArtifacts& art);

struct RunReport {
    DprConfig config;
    SplitSpec split;
    TrainingArtifacts train;
    std::vector<FittedRow> fitted;
    StageMetrics train_metrics;
    StageMetrics cv_metrics;
    std::optional<StageMetrics> validation_metrics;
    std::optional<StageMetrics> test_metrics;
    std::vector<ForecastRow> forecast;
    ForecastSummary forecast_summary;
    std::optional<ClusterModel> full_clusters;  // --refit-clusters-full
    std::vector<std::string> full_entities, full_periods;
};

/// transform -> mix features -> dbscan -> dummies -> standardize -> CV ->
/// final fit -> test predictions. Errors carry the failing stage's name.
RunReport run_dpr(const PanelDataset& data, const DprConfig& config, const SplitSpec& split);

StageMetrics stage_metrics(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, double sparsity);

}  // namespace dpr
