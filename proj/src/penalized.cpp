#include "dpr/penalized.hpp"

#include <cassert>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "dpr/errors.hpp"
#include "dpr/format.hpp"

namespace dpr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<std::string> default_names(std::vector<std::string> names, Index p) {
    if (names.empty())
        for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    if (static_cast<Index>(names.size()) != p) throw InputError("column name count does not match design width");
    return names;
}

bool column_is_constant(const MatrixXd& X, Index j) {
    if (X.rows() == 0) return true;
    const double first = X(0, j);
    for (Index i = 1; i < X.rows(); ++i)
        if (X(i, j) != first) return false;
    return true;
}

void check_finite(const MatrixXd& X, const VectorXd& y) {
    if (!X.allFinite() || !y.allFinite()) throw InputError("design matrix contains NaN or Inf");
    if (X.rows() != y.size()) throw InputError("design has " + std::to_string(X.rows()) + " rows but " +
                                               std::to_string(y.size()) + " targets");
}

// Columns the solvers work on: not pinned by the design and not constant
// within these rows.
struct CenteredProblem {
    std::vector<Index> active;
    MatrixXd Xc;
    VectorXd x_mean;
    VectorXd yc;
    double y_mean = 0.0;
};

CenteredProblem center(const DesignMatrix& dm) {
    CenteredProblem cp;
    for (Index j = 0; j < dm.cols(); ++j)
        if (!dm.constant[static_cast<std::size_t>(j)] && !column_is_constant(dm.X, j)) cp.active.push_back(j);
    const Index n = dm.rows();
    cp.Xc.resize(n, static_cast<Index>(cp.active.size()));
    cp.x_mean.resize(static_cast<Index>(cp.active.size()));
    for (std::size_t k = 0; k < cp.active.size(); ++k) {
        const auto col = dm.X.col(cp.active[k]);
        const double m = col.mean();
        cp.x_mean(static_cast<Index>(k)) = m;
        cp.Xc.col(static_cast<Index>(k)) = col.array() - m;
    }
    cp.y_mean = dm.y.mean();
    cp.yc = dm.y.array() - cp.y_mean;
    return cp;
}

FittedModel finish(const DesignMatrix& dm, const CenteredProblem& cp, const VectorXd& beta_active,
                   const PenaltySpec& penalty, long long iterations, bool converged) {
    FittedModel m;
    m.penalty = penalty;
    m.column_names = dm.column_names;
    m.column_means = dm.column_means;
    m.column_stds = dm.column_stds;
    m.pinned_zero = dm.constant;
    m.coefficients = VectorXd::Zero(dm.cols());
    for (std::size_t k = 0; k < cp.active.size(); ++k) m.coefficients(cp.active[k]) = beta_active(static_cast<Index>(k));
    m.intercept = cp.y_mean - (cp.active.empty() ? 0.0 : cp.x_mean.dot(beta_active));

    m.source_coefficients = VectorXd::Zero(dm.cols());
    m.source_intercept = m.intercept;
    for (Index j = 0; j < dm.cols(); ++j) {
        if (m.pinned_zero[static_cast<std::size_t>(j)]) continue;
        m.source_coefficients(j) = m.coefficients(j) / m.column_stds(j);
        m.source_intercept -= m.source_coefficients(j) * m.column_means(j);
    }

    const VectorXd fitted = predict_design(m, dm.X);
    m.diagnostics.mse = metric_mse(dm.y, fitted);
    const double tss = (dm.y.array() - cp.y_mean).square().sum();
    m.diagnostics.r2 = tss > 0 ? metric_r2(dm.y, fitted) : std::numeric_limits<double>::quiet_NaN();
    m.diagnostics.sparsity = metric_sparsity(m);
    m.diagnostics.iterations = iterations;
    m.diagnostics.converged = converged;
    return m;
}

}  // namespace

DesignMatrix DesignMatrix::subset(const std::vector<Index>& rows) const {
    DesignMatrix out;
    out.X.resize(static_cast<Index>(rows.size()), X.cols());
    out.y.resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Index>(i)) = X.row(rows[i]);
        out.y(static_cast<Index>(i)) = y(rows[i]);
    }
    out.column_names = column_names;
    out.column_means = column_means;
    out.column_stds = column_stds;
    out.constant = constant;
    out.standardized = standardized;
    return out;
}

MatrixXd DesignMatrix::transform(const MatrixXd& source_rows) const {
    if (source_rows.cols() != cols())
        throw InputError("row width " + std::to_string(source_rows.cols()) + " does not match design width " +
                         std::to_string(cols()));
    MatrixXd out = source_rows;
    for (Index j = 0; j < cols(); ++j) {
        if (constant[static_cast<std::size_t>(j)]) continue;
        out.col(j) = (source_rows.col(j).array() - column_means(j)) / column_stds(j);
    }
    return out;
}

DesignMatrix make_design(MatrixXd X, VectorXd y, std::vector<std::string> names) {
    check_finite(X, y);
    DesignMatrix dm;
    dm.column_names = default_names(std::move(names), X.cols());
    dm.column_means = VectorXd::Zero(X.cols());
    dm.column_stds = VectorXd::Ones(X.cols());
    dm.constant.resize(static_cast<std::size_t>(X.cols()));
    for (Index j = 0; j < X.cols(); ++j) dm.constant[static_cast<std::size_t>(j)] = column_is_constant(X, j);
    dm.X = std::move(X);
    dm.y = std::move(y);
    return dm;
}

DesignMatrix standardize(const MatrixXd& X, const VectorXd& y, std::vector<std::string> names) {
    check_finite(X, y);
    const Index n = X.rows();
    if (n < 2) throw InputError("standardize needs at least two rows");
    DesignMatrix dm;
    dm.column_names = default_names(std::move(names), X.cols());
    dm.X = X;
    dm.y = y;
    dm.standardized = true;
    dm.column_means.resize(X.cols());
    dm.column_stds.resize(X.cols());
    dm.constant.resize(static_cast<std::size_t>(X.cols()));
    for (Index j = 0; j < X.cols(); ++j) {
        const double mean = X.col(j).mean();
        dm.column_means(j) = mean;
        if (column_is_constant(X, j)) {
            dm.constant[static_cast<std::size_t>(j)] = true;
            dm.column_stds(j) = 0.0;
            continue;
        }
        const VectorXd centered = X.col(j).array() - mean;
        const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(n - 1));
        dm.column_stds(j) = sd;
        dm.X.col(j) = centered / sd;
    }
    return dm;
}

double PenaltySpec::l1_ratio() const {
    switch (kind) {
        case PenaltyKind::Ridge: return 0.0;
        case PenaltyKind::Lasso: return 1.0;
        case PenaltyKind::ElasticNet: return alpha;
    }
    return alpha;
}

void PenaltySpec::validate() const {
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
    if (kind == PenaltyKind::ElasticNet && !(alpha >= 0 && alpha <= 1))
        throw InputError("alpha must lie in [0, 1]");
}

std::string to_string(PenaltyKind k) {
    switch (k) {
        case PenaltyKind::Ridge: return "ridge";
        case PenaltyKind::Lasso: return "lasso";
        case PenaltyKind::ElasticNet: return "elastic_net";
    }
    return "?";
}

PenaltyKind parse_penalty_kind(const std::string& s) {
    if (s == "ridge") return PenaltyKind::Ridge;
    if (s == "lasso") return PenaltyKind::Lasso;
    if (s == "elastic_net" || s == "elasticnet" || s == "en") return PenaltyKind::ElasticNet;
    throw InputError("unknown penalty kind '" + s + "'");
}

FittedModel fit_ridge(const DesignMatrix& dm, double lambda) {
    const auto penalty = PenaltySpec::ridge(lambda);
    penalty.validate();
    check_finite(dm.X, dm.y);
    if (dm.rows() < 1) throw InputError("ridge fit needs at least one row");
    const auto cp = center(dm);
    const Index p = cp.Xc.cols();
    VectorXd beta = VectorXd::Zero(p);
    if (p > 0) {
        const double n = static_cast<double>(dm.rows());
        if (lambda == 0.0) {
            Eigen::ColPivHouseholderQR<MatrixXd> qr(cp.Xc);
            if (qr.rank() < p)
                throw NumericalError("least-squares system is rank deficient (rank " + std::to_string(qr.rank()) +
                                     " < " + std::to_string(p) + "); use lambda > 0");
            beta = qr.solve(cp.yc);
        } else {
            MatrixXd gram = cp.Xc.transpose() * cp.Xc / n;
            gram.diagonal().array() += lambda;
            const VectorXd rhs = cp.Xc.transpose() * cp.yc / n;
            Eigen::LLT<MatrixXd> llt(gram);
            if (llt.info() != Eigen::Success) throw NumericalError("ridge normal equations are not positive definite");
            beta = llt.solve(rhs);
        }
    }
    return finish(dm, cp, beta, penalty, 1, true);
}

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

FittedModel fit_elastic_net(const DesignMatrix& dm, double lambda, double alpha, const SolverOptions& opts,
                            const VectorXd* warm_start) {
    auto penalty = PenaltySpec::elastic_net(lambda, alpha);
    penalty.validate();
    check_finite(dm.X, dm.y);
    if (dm.rows() < 1) throw InputError("elastic net fit needs at least one row");
    if (!(opts.tol > 0) || opts.max_iter < 1) throw InputError("solver needs tol > 0 and max_iter >= 1");

    const auto cp = center(dm);
    const Index p = cp.Xc.cols();
    const double n = static_cast<double>(dm.rows());
    VectorXd beta = VectorXd::Zero(p);
    if (warm_start) {
        if (warm_start->size() != dm.cols()) throw InputError("warm start has the wrong width");
        for (std::size_t k = 0; k < cp.active.size(); ++k) beta(static_cast<Index>(k)) = (*warm_start)(cp.active[k]);
    }

    // Per-coordinate minimizer of (1/N)|r - x_j b|^2 + l1|b| + l2 b^2, scaled by N/2.
    // Works on the Gram matrix: q = Xc^T r is kept up to date, so a
    // coordinate update costs O(p) rather than O(N).
    const double l1_half = n * lambda * alpha / 2.0;
    const double l2 = n * lambda * (1.0 - alpha);
    const MatrixXd G = cp.Xc.transpose() * cp.Xc;
    const VectorXd c = cp.Xc.transpose() * cp.yc;
    VectorXd q = c - G * beta;

    // |z| within rounding of the threshold counts as zero; otherwise a column
    // that exactly repeats an earlier one picks up a 1e-17-sized coefficient.
    const double slack = 1e-12 * std::max(1.0, c.size() ? c.cwiseAbs().maxCoeff() : 0.0);
    const auto sweep = [&](auto&& indices) {
        double max_change = 0.0;
        for (Index j : indices) {
            const double old = beta(j);
            const double z = q(j) + G(j, j) * old;
            const double updated =
                std::abs(z) <= l1_half + slack ? 0.0 : soft_threshold(z, l1_half) / (G(j, j) + l2);
            const double delta = updated - old;
            if (delta != 0.0) {
                q.noalias() -= delta * G.col(j);
                beta(j) = updated;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        return max_change;
    };
    std::vector<Index> all(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;

    const double yy = cp.yc.squaredNorm();
    const auto centered_objective = [&](const VectorXd& b) {
        const double rss = yy - 2.0 * b.dot(c) + b.dot(G * b);
        return rss / n + lambda * (alpha * b.lpNorm<1>() + (1.0 - alpha) * b.squaredNorm());
    };
#ifndef NDEBUG
    double prev_obj = centered_objective(beta);
    const auto check_descent = [&] {
        const double obj = centered_objective(beta);
        assert(obj <= prev_obj + 1e-10 * std::max(1.0, std::abs(prev_obj)));
        prev_obj = obj;
    };
#else
    const auto check_descent = [] {};
#endif

    // With the signs fixed, the objective restricted to the current support
    // is a smooth quadratic. Columns that depend linearly on earlier support
    // columns are sent to zero; the rest move towards the quadratic's
    // minimizer, stopping where the first coordinate reaches zero and
    // dropping it. A move is taken only if it does not raise the objective;
    // returns false when no move was possible.
    const auto settle_support = [&](std::vector<Index> support) {
        bool moved = false;
        while (!support.empty()) {
            std::vector<Index> kept;  // positions in `support`
            MatrixXd L(static_cast<Index>(support.size()), static_cast<Index>(support.size()));
            for (std::size_t a = 0; a < support.size(); ++a) {
                const Index j = support[a];
                const auto k = static_cast<Index>(kept.size());
                VectorXd v(k);
                for (Index i = 0; i < k; ++i) v(i) = G(support[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])], j);
                const VectorXd w = k ? VectorXd(L.topLeftCorner(k, k).triangularView<Eigen::Lower>().solve(v)) : VectorXd();
                const double diag = G(j, j) + l2;
                const double d = diag - w.squaredNorm();
                if (!(d > 1e-10 * diag)) continue;
                L.row(k).head(k) = w.transpose();
                L(k, k) = std::sqrt(d);
                kept.push_back(static_cast<Index>(a));
            }
            const auto k = static_cast<Index>(kept.size());
            VectorXd rhs(k);
            for (Index i = 0; i < k; ++i) {
                const Index j = support[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])];
                rhs(i) = c(j) - l1_half * (beta(j) > 0 ? 1.0 : -1.0);
            }
            const auto Lk = L.topLeftCorner(k, k).triangularView<Eigen::Lower>();
            const VectorXd sol = Lk.transpose().solve(Lk.solve(rhs));
            if (!sol.allFinite()) return moved;
            VectorXd target = VectorXd::Zero(static_cast<Index>(support.size()));
            for (Index i = 0; i < k; ++i) target(kept[static_cast<std::size_t>(i)]) = sol(i);

            double t = 1.0;
            Index hit = -1;
            for (Index i = 0; i < k; ++i) {
                const Index a = kept[static_cast<std::size_t>(i)];
                const double cur = beta(support[static_cast<std::size_t>(a)]);
                if (target(a) * cur <= 0) {
                    const double ta = cur / (cur - target(a));
                    if (ta < t) {
                        t = ta;
                        hit = a;
                    }
                }
            }
            VectorXd candidate = beta;
            for (std::size_t a = 0; a < support.size(); ++a) {
                const Index j = support[a];
                candidate(j) = hit < 0 ? target(static_cast<Index>(a))
                                       : beta(j) + t * (target(static_cast<Index>(a)) - beta(j));
            }
            if (hit >= 0) candidate(support[static_cast<std::size_t>(hit)]) = 0.0;
            if (centered_objective(candidate) > centered_objective(beta)) return moved;
            beta = candidate;
            q = c - G * beta;
            moved = true;
            check_descent();
            if (hit < 0) return true;
            support.erase(support.begin() + hit);
        }
        return moved;
    };

    long long sweeps = 0;
    bool converged = p == 0;
    // Full sweeps decide convergence; between them the non-zero coordinates
    // are settled directly, or by sweeps of their own when that fails.
    while (!converged && sweeps < opts.max_iter) {
        ++sweeps;
        const double full_change = sweep(all);
        check_descent();
        if (full_change < opts.tol) {
            converged = true;
            break;
        }
        std::vector<Index> nonzero;
        for (Index j = 0; j < p; ++j)
            if (beta(j) != 0.0) nonzero.push_back(j);
        if (settle_support(nonzero)) continue;
        while (sweeps < opts.max_iter) {
            ++sweeps;
            const double change = sweep(nonzero);
            check_descent();
            if (change < opts.tol) break;
        }
        q = c - G * beta;  // drop accumulated rounding
    }
    return finish(dm, cp, beta, penalty, sweeps, converged);
}

FittedModel fit_lasso(const DesignMatrix& dm, double lambda, const SolverOptions& opts) {
    auto m = fit_elastic_net(dm, lambda, 1.0, opts);
    m.penalty = PenaltySpec::lasso(lambda);
    return m;
}

FittedModel fit(const DesignMatrix& dm, const PenaltySpec& penalty, const SolverOptions& opts) {
    switch (penalty.kind) {
        case PenaltyKind::Ridge: return fit_ridge(dm, penalty.lambda);
        case PenaltyKind::Lasso: return fit_lasso(dm, penalty.lambda, opts);
        case PenaltyKind::ElasticNet: return fit_elastic_net(dm, penalty.lambda, penalty.alpha, opts);
    }
    throw InputError("unknown penalty kind");
}

std::vector<FittedModel> regularization_path(const DesignMatrix& dm, const std::vector<double>& lambdas, double alpha,
                                             const SolverOptions& opts) {
    if (lambdas.empty()) throw InputError("lambda grid is empty");
    for (std::size_t i = 1; i < lambdas.size(); ++i)
        if (!(lambdas[i] < lambdas[i - 1])) throw InputError("lambda grid must be strictly descending");
    std::vector<FittedModel> path;
    path.reserve(lambdas.size());
    for (double lambda : lambdas) {
        if (alpha == 0.0) {
            path.push_back(fit_ridge(dm, lambda));
        } else {
            const VectorXd* warm = path.empty() ? nullptr : &path.back().coefficients;
            path.push_back(fit_elastic_net(dm, lambda, alpha, opts, warm));
        }
    }
    return path;
}

VectorXd predict_design(const FittedModel& model, const MatrixXd& design_rows) {
    if (design_rows.cols() != model.width())
        throw InputError("row width " + std::to_string(design_rows.cols()) + " does not match model width " +
                         std::to_string(model.width()));
    VectorXd out = design_rows * model.coefficients;
    out.array() += model.intercept;
    return out;
}

VectorXd predict(const FittedModel& model, const MatrixXd& rows) {
    if (rows.cols() != model.width())
        throw InputError("row width " + std::to_string(rows.cols()) + " does not match model width " +
                         std::to_string(model.width()));
    MatrixXd scaled = rows;
    for (Index j = 0; j < rows.cols(); ++j) {
        if (model.pinned_zero[static_cast<std::size_t>(j)]) continue;
        scaled.col(j) = (rows.col(j).array() - model.column_means(j)) / model.column_stds(j);
    }
    return predict_design(model, scaled);
}

double objective(const DesignMatrix& dm, double intercept, const VectorXd& beta, double lambda, double alpha) {
    const VectorXd r = (dm.y - dm.X * beta).array() - intercept;
    return r.squaredNorm() / static_cast<double>(dm.rows()) +
           lambda * (alpha * beta.lpNorm<1>() + (1.0 - alpha) * beta.squaredNorm());
}

double metric_mse(const VectorXd& y, const VectorXd& yhat) {
    if (y.size() != yhat.size()) throw InputError("metric inputs differ in length");
    if (y.size() == 0) throw InputError("metric needs at least one value");
    return (y - yhat).squaredNorm() / static_cast<double>(y.size());
}

double metric_r2(const VectorXd& y, const VectorXd& yhat) {
    if (y.size() != yhat.size()) throw InputError("metric inputs differ in length");
    if (y.size() == 0) throw InputError("metric needs at least one value");
    const double tss = (y.array() - y.mean()).square().sum();
    if (!(tss > 0)) throw InputError("R^2 is undefined when the response has zero variance");
    return 1.0 - (y - yhat).squaredNorm() / tss;
}

double metric_sparsity(const VectorXd& coefficients) {
    if (coefficients.size() == 0) return 0.0;
    return static_cast<double>((coefficients.array() != 0.0).count()) / static_cast<double>(coefficients.size());
}

double metric_sparsity(const FittedModel& model) {
    long long nonzero = 0, total = 0;
    for (Index j = 0; j < model.width(); ++j) {
        if (model.pinned_zero[static_cast<std::size_t>(j)]) continue;
        ++total;
        if (model.coefficients(j) != 0.0) ++nonzero;
    }
    return total == 0 ? 0.0 : static_cast<double>(nonzero) / static_cast<double>(total);
}

// Text record:
//   dpr-model 1
//   <key> <value>            (scalar fields)
//   columns <p>
//   <name>\t<mean>\t<std>\t<pinned>\t<coef>\t<source_coef>   (p lines)
void save_model(std::ostream& out, const FittedModel& m) {
    out << "dpr-model 1\n";
    out << "kind " << to_string(m.penalty.kind) << '\n';
    out << "lambda " << fmt_real(m.penalty.lambda) << '\n';
    out << "alpha " << fmt_real(m.penalty.l1_ratio()) << '\n';
    out << "intercept " << fmt_real(m.intercept) << '\n';
    out << "source_intercept " << fmt_real(m.source_intercept) << '\n';
    out << "r2 " << fmt_real(m.diagnostics.r2) << '\n';
    out << "mse " << fmt_real(m.diagnostics.mse) << '\n';
    out << "sparsity " << fmt_real(m.diagnostics.sparsity) << '\n';
    out << "iterations " << m.diagnostics.iterations << '\n';
    out << "converged " << (m.diagnostics.converged ? 1 : 0) << '\n';
    out << "columns " << m.width() << '\n';
    for (Index j = 0; j < m.width(); ++j) {
        out << m.column_names[static_cast<std::size_t>(j)] << '\t' << fmt_real(m.column_means(j)) << '\t'
            << fmt_real(m.column_stds(j)) << '\t' << (m.pinned_zero[static_cast<std::size_t>(j)] ? 1 : 0) << '\t'
            << fmt_real(m.coefficients(j)) << '\t' << fmt_real(m.source_coefficients(j)) << '\n';
    }
}

FittedModel load_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "dpr-model 1") throw InputError("not a model record");
    FittedModel m;
    const auto real = [](const std::string& key, const std::string& text) {
        double v;
        if (!parse_real(text, v)) throw InputError("model record: bad value for '" + key + "'");
        return v;
    };
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::istringstream ls(line);
        std::string key, value;
        ls >> key >> value;
        if (key == "kind") m.penalty.kind = parse_penalty_kind(value);
        else if (key == "lambda") m.penalty.lambda = real(key, value);
        else if (key == "alpha") m.penalty.alpha = real(key, value);
        else if (key == "intercept") m.intercept = real(key, value);
        else if (key == "source_intercept") m.source_intercept = real(key, value);
        else if (key == "r2") m.diagnostics.r2 = real(key, value);
        else if (key == "mse") m.diagnostics.mse = real(key, value);
        else if (key == "sparsity") m.diagnostics.sparsity = real(key, value);
        else if (key == "iterations") m.diagnostics.iterations = static_cast<long long>(real(key, value));
        else if (key == "converged") m.diagnostics.converged = value == "1";
        else if (key == "columns") {
            const auto p = static_cast<Index>(real(key, value));
            m.coefficients.resize(p);
            m.source_coefficients.resize(p);
            m.column_means.resize(p);
            m.column_stds.resize(p);
            m.pinned_zero.resize(static_cast<std::size_t>(p));
            m.column_names.resize(static_cast<std::size_t>(p));
            for (Index j = 0; j < p; ++j) {
                if (!std::getline(in, line)) throw InputError("model record: truncated column table");
                const auto cells = split_line(line, '\t');
                if (cells.size() != 6) throw InputError("model record: malformed column line");
                m.column_names[static_cast<std::size_t>(j)] = cells[0];
                m.column_means(j) = real("mean", cells[1]);
                m.column_stds(j) = real("std", cells[2]);
                m.pinned_zero[static_cast<std::size_t>(j)] = cells[3] == "1";
                m.coefficients(j) = real("coef", cells[4]);
                m.source_coefficients(j) = real("source_coef", cells[5]);
            }
            break;
        } else {
            throw InputError("model record: unknown key '" + key + "'");
        }
    }
    if (static_cast<std::size_t>(m.coefficients.size()) != m.column_names.size() || m.column_names.empty())
        throw InputError("model record has no column table");
    return m;
}

}  // namespace dpr
