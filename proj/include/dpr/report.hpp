#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dpr/pipeline.hpp"

namespace dpr {

// Delimited tables. Every file starts with a header row; reals are written
// with 17 significant digits.

void write_cluster_table(std::ostream& out, const PanelDataset& rows, const ClusterModel& model);
void write_scan_table(std::ostream& out, const std::vector<ScanRow>& rows);
/// columns: rank, k_distance (descending)
void write_k_distance(std::ostream& out, const std::vector<double>& profile);
void write_cv_table(std::ostream& out, const CvResult& cv);
void write_coefficients(std::ostream& out, const FittedModel& model);
void write_standardization(std::ostream& out, const DesignMatrix& dm);
/// columns: lambda, then one column per design column
void write_path_trajectories(std::ostream& out, const std::vector<double>& lambdas,
                             const std::vector<FittedModel>& path);
void write_fitted(std::ostream& out, const std::vector<FittedRow>& rows);
void write_forecast(std::ostream& out, const std::vector<ForecastRow>& rows);
/// columns: statistic, value
void write_forecast_summary(std::ostream& out, const ForecastSummary& summary);
/// columns: split, entity, period, actual, predicted
void write_fit_scatter(std::ostream& out, const RunReport& report);
void write_summary_json(std::ostream& out, const RunReport& report);

void save_pipeline_model(std::ostream& out, const PipelineModel& pm);
PipelineModel load_pipeline_model(std::istream& in);

/// Writes `text` files into a fresh sibling directory and renames it onto
/// `dir`. Either every file lands or `dir` is left untouched.
void write_directory_atomically(const std::string& dir,
                                const std::vector<std::pair<std::string, std::string>>& files);

/// The report directory: clusters.csv, cv_table.csv, coefficients.csv,
/// fitted.csv, forecast.csv, summary.json, model.txt, standardization.csv,
/// scan.csv (when eps was scanned) and the plot data from emit_plot_data.
std::vector<std::pair<std::string, std::string>> render_report(const RunReport& report, const PanelDataset& data);
void write_report(const RunReport& report, const PanelDataset& data, const std::string& dir);

/// path_trajectories.csv, fit_scatter.csv, k_distance.csv.
std::vector<std::pair<std::string, std::string>> render_plot_data(const RunReport& report);
void emit_plot_data(const RunReport& report, const std::string& dir);

/// Training-only artifacts (cluster labels of training rows, standardization
/// statistics, CV table, final model) rendered as bytes; identical inputs
/// give identical bytes.
std::vector<std::pair<std::string, std::string>> render_training_artifacts(const TrainingArtifacts& art,
                                                                           const DprConfig& config);

}  // namespace dpr
