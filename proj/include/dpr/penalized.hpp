#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace dpr {

/// Regression design. When `standardized`, columns of X have been centered
/// and scaled by the stored sample statistics; `constant` columns had zero
/// variance and are left as they were, with their coefficient pinned to 0.
struct DesignMatrix {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> column_names;
    Eigen::VectorXd column_means;
    Eigen::VectorXd column_stds;
    std::vector<bool> constant;
    bool standardized = false;

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }

    /// Same columns and statistics, restricted to the given rows.
    DesignMatrix subset(const std::vector<Eigen::Index>& rows) const;
    /// Maps rows in source units onto this design's scale.
    Eigen::MatrixXd transform(const Eigen::MatrixXd& source_rows) const;
};

/// Unstandardized design (identity statistics).
DesignMatrix make_design(Eigen::MatrixXd X, Eigen::VectorXd y, std::vector<std::string> names = {});

/// Centers and scales each column by its mean and sample (n-1) standard
/// deviation. y is left as is. Needs n >= 2.
DesignMatrix standardize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> names = {});

enum class PenaltyKind { Ridge, Lasso, ElasticNet };

/// Objective: (1/N)·RSS + lambda·(alpha·|b|_1 + (1-alpha)·|b|_2^2).
/// Ridge and Lasso are the alpha = 0 and alpha = 1 cases.
struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::ElasticNet;
    double lambda = 0.0;
    double alpha = 0.5;

    static PenaltySpec ridge(double lambda) { return {PenaltyKind::Ridge, lambda, 0.0}; }
    static PenaltySpec lasso(double lambda) { return {PenaltyKind::Lasso, lambda, 1.0}; }
    static PenaltySpec elastic_net(double lambda, double alpha) { return {PenaltyKind::ElasticNet, lambda, alpha}; }

    /// The alpha actually used by the objective.
    double l1_ratio() const;
    void validate() const;
};

std::string to_string(PenaltyKind k);
PenaltyKind parse_penalty_kind(const std::string& s);

struct FitDiagnostics {
    double r2 = 0.0;
    double mse = 0.0;
    double sparsity = 0.0;
    long long iterations = 0;
    bool converged = true;
};

struct FittedModel {
    PenaltySpec penalty;
    // on the design (standardized) scale
    double intercept = 0.0;
    Eigen::VectorXd coefficients;
    // on the source scale of the design's columns
    double source_intercept = 0.0;
    Eigen::VectorXd source_coefficients;

    std::vector<std::string> column_names;
    Eigen::VectorXd column_means;
    Eigen::VectorXd column_stds;
    std::vector<bool> pinned_zero;
    FitDiagnostics diagnostics;

    Eigen::Index width() const { return coefficients.size(); }
};

struct SolverOptions {
    double tol = 1e-9;            // max absolute coefficient change per sweep
    long long max_iter = 100000;  // sweeps
};

/// Closed-form ridge via the normal equations on centered data. lambda = 0
/// is plain least squares and throws NumericalError on rank deficiency.
FittedModel fit_ridge(const DesignMatrix& dm, double lambda);

/// sign(z) * max(|z| - gamma, 0)
double soft_threshold(double z, double gamma);

/// Cyclic coordinate descent over columns in index order. `warm_start`, when
/// given, seeds the coefficients (design scale). Non-convergence is
/// reported through diagnostics.converged, never thrown.
FittedModel fit_elastic_net(const DesignMatrix& dm, double lambda, double alpha, const SolverOptions& opts = {},
                            const Eigen::VectorXd* warm_start = nullptr);

FittedModel fit_lasso(const DesignMatrix& dm, double lambda, const SolverOptions& opts = {});

/// Dispatches on penalty.kind; Ridge uses the closed form.
FittedModel fit(const DesignMatrix& dm, const PenaltySpec& penalty, const SolverOptions& opts = {});

/// Warm-started fits over a strictly descending lambda grid. alpha = 0
/// uses the ridge closed form at every step.
std::vector<FittedModel> regularization_path(const DesignMatrix& dm, const std::vector<double>& lambdas,
                                             double alpha, const SolverOptions& opts = {});

/// Predictions for rows in the source units of the design's columns.
Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& rows);
/// Predictions for rows already on the design scale.
Eigen::VectorXd predict_design(const FittedModel& model, const Eigen::MatrixXd& design_rows);

/// Value of the penalized objective at (intercept, coefficients) on `dm`.
double objective(const DesignMatrix& dm, double intercept, const Eigen::VectorXd& beta, double lambda, double alpha);

double metric_mse(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);
/// Throws InputError when y has zero variance.
double metric_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);
/// Fraction of non-zero coefficients, ignoring pinned columns.
double metric_sparsity(const FittedModel& model);
double metric_sparsity(const Eigen::VectorXd& coefficients);

void save_model(std::ostream& out, const FittedModel& model);
FittedModel load_model(std::istream& in);

}  // namespace dpr
