#include "dpr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "dpr/errors.hpp"
#include "parallel.hpp"

namespace dpr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(OutlierPolicy p) { return p == OutlierPolicy::UniqueDummy ? "unique_dummy" : "exclude"; }

OutlierPolicy parse_outlier_policy(const std::string& s) {
    if (s == "unique_dummy" || s == "UniqueDummy") return OutlierPolicy::UniqueDummy;
    if (s == "exclude" || s == "Exclude") return OutlierPolicy::Exclude;
    throw InputError("unknown outlier policy '" + s + "'");
}

std::string to_string(FoldMode m) { return m == FoldMode::RowBlocks ? "rows" : "periods"; }

FoldMode parse_fold_mode(const std::string& s) {
    if (s == "rows") return FoldMode::RowBlocks;
    if (s == "periods") return FoldMode::PeriodBlocks;
    throw InputError("unknown fold mode '" + s + "'");
}

// ---------------------------------------------------------------------------

std::vector<std::string> DummyLayout::column_names() const {
    std::vector<std::string> names;
    for (int c : cluster_columns) names.push_back("cluster_" + std::to_string(c));
    for (Index r : noise_rows) names.push_back("noise_row_" + std::to_string(r));
    return names;
}

AugmentedDesign augment_with_dummies(const DesignMatrix& dm, const std::vector<int>& labels, OutlierPolicy policy,
                                     int baseline) {
    if (static_cast<Index>(labels.size()) != dm.rows())
        throw InputError("need one cluster label per design row");
    int k = 0;
    for (int l : labels) {
        if (l < kNoise) throw InputError("unknown cluster label " + std::to_string(l));
        k = std::max(k, l + 1);
    }
    std::vector<bool> present(static_cast<std::size_t>(k), false);
    for (int l : labels)
        if (l != kNoise) present[static_cast<std::size_t>(l)] = true;
    for (int c = 0; c < k; ++c)
        if (!present[static_cast<std::size_t>(c)])
            throw InputError("cluster labels are not contiguous: cluster " + std::to_string(c) + " has no rows");
    if (k > 0 && (baseline < 0 || baseline >= k))
        throw InputError("baseline cluster " + std::to_string(baseline) + " does not exist (k = " + std::to_string(k) +
                         ")");

    AugmentedDesign out;
    out.layout.k = k;
    out.layout.baseline = k > 0 ? baseline : 0;
    for (int c = 0; c < k; ++c)
        if (c != baseline) out.layout.cluster_columns.push_back(c);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != kNoise) {
            out.kept_rows.push_back(static_cast<Index>(i));
        } else if (policy == OutlierPolicy::UniqueDummy) {
            out.kept_rows.push_back(static_cast<Index>(i));
            out.layout.noise_rows.push_back(static_cast<Index>(i));
        } else {
            out.dropped_rows.push_back(static_cast<Index>(i));
        }
    }

    const auto n = static_cast<Index>(out.kept_rows.size());
    const Index p = dm.cols();
    const auto w = static_cast<Index>(out.layout.width());
    MatrixXd X = MatrixXd::Zero(n, p + w);
    VectorXd y(n);
    const auto n_clusters = static_cast<Index>(out.layout.cluster_columns.size());
    for (Index r = 0; r < n; ++r) {
        const Index src = out.kept_rows[static_cast<std::size_t>(r)];
        X.row(r).head(p) = dm.X.row(src);
        y(r) = dm.y(src);
        const int l = labels[static_cast<std::size_t>(src)];
        if (l == kNoise) {
            const auto it = std::find(out.layout.noise_rows.begin(), out.layout.noise_rows.end(), src);
            X(r, p + n_clusters + (it - out.layout.noise_rows.begin())) = 1.0;
        } else if (l != baseline) {
            X(r, p + (l < baseline ? l : l - 1)) = 1.0;
        }
    }
    auto names = dm.column_names;
    const auto extra = out.layout.column_names();
    names.insert(names.end(), extra.begin(), extra.end());
    out.design = make_design(std::move(X), std::move(y), std::move(names));
    return out;
}

MatrixXd dummy_block(const DummyLayout& layout, const std::vector<int>& labels) {
    MatrixXd D = MatrixXd::Zero(static_cast<Index>(labels.size()), static_cast<Index>(layout.width()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int l = labels[i];
        if (l == kNoise || l == layout.baseline) continue;
        if (l < 0 || l >= layout.k) throw InputError("unknown cluster label " + std::to_string(l));
        D(static_cast<Index>(i), l < layout.baseline ? l : l - 1) = 1.0;
    }
    return D;
}

// ---------------------------------------------------------------------------

SplitSpec SplitSpec::last_periods(const PanelDataset& data, std::size_t n_test, int cv_folds) {
    if (n_test == 0 || n_test >= data.periods.size())
        throw InputError("test period count must be in [1, " + std::to_string(data.periods.size()) + ")");
    SplitSpec s;
    const auto cut = data.periods.end() - static_cast<std::ptrdiff_t>(n_test);
    s.train_periods.assign(data.periods.begin(), cut);
    s.test_periods.assign(cut, data.periods.end());
    s.cv_folds = cv_folds;
    return s;
}

std::pair<PanelDataset, PanelDataset> chronological_split(const PanelDataset& data, const SplitSpec& spec) {
    if (spec.train_periods.empty()) throw InputError("split has no training periods");
    if (spec.test_periods.empty()) throw InputError("split has no test periods");
    if (spec.cv_folds < 2) throw InputError("cv_folds must be >= 2");
    std::vector<std::string> joined = spec.train_periods;
    joined.insert(joined.end(), spec.test_periods.begin(), spec.test_periods.end());
    if (joined != data.periods)
        throw InputError("split periods must be a chronological prefix/suffix partition of the data periods");

    PanelDataset train = data, test = data;
    train.observations.clear();
    test.observations.clear();
    const std::size_t n_train = spec.train_periods.size();
    for (const auto& o : data.observations) (o.period < n_train ? train : test).observations.push_back(o);
    if (train.observations.empty() || test.observations.empty()) throw InputError("split leaves one side empty");
    train.normalize();
    test.normalize();
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------

std::vector<int> assign_folds(std::size_t n, const CvOptions& opts) {
    const int K = opts.folds;
    if (K < 2) throw InputError("cross-validation needs at least 2 folds");
    std::vector<int> fold(n);
    if (opts.mode == FoldMode::RowBlocks) {
        for (std::size_t i = 0; i < n; ++i)
            fold[i] = static_cast<int>(i * static_cast<std::size_t>(K) / std::max<std::size_t>(n, 1));
    } else {
        if (opts.row_periods.size() != n) throw InputError("period-blocked folds need a period index per row");
        std::set<std::size_t> distinct(opts.row_periods.begin(), opts.row_periods.end());
        if (distinct.size() < static_cast<std::size_t>(K))
            throw InputError("period-blocked folds need at least as many periods as folds");
        const std::vector<std::size_t> order(distinct.begin(), distinct.end());
        for (std::size_t i = 0; i < n; ++i) {
            const auto rank = static_cast<std::size_t>(
                std::lower_bound(order.begin(), order.end(), opts.row_periods[i]) - order.begin());
            fold[i] = static_cast<int>(rank * static_cast<std::size_t>(K) / order.size());
        }
    }
    std::vector<std::size_t> sizes(static_cast<std::size_t>(K), 0);
    for (int f : fold) ++sizes[static_cast<std::size_t>(f)];
    for (int f = 0; f < K; ++f)
        if (sizes[static_cast<std::size_t>(f)] < 2)
            throw InputError("cross-validation fold " + std::to_string(f) + " has fewer than 2 rows");
    return fold;
}

CvResult cross_validate(const DesignMatrix& train, PenaltyKind kind, const std::vector<double>& lambda_grid,
                        const std::vector<double>& alpha_grid, const CvOptions& opts) {
    if (lambda_grid.empty()) throw InputError("lambda grid is empty");
    std::vector<double> alphas;
    switch (kind) {
        case PenaltyKind::Ridge: alphas = {0.0}; break;
        case PenaltyKind::Lasso: alphas = {1.0}; break;
        case PenaltyKind::ElasticNet:
            if (alpha_grid.empty()) throw InputError("alpha grid is empty");
            alphas = alpha_grid;
            break;
    }
    for (double l : lambda_grid) PenaltySpec{kind, l, 0.5}.validate();
    for (double a : alphas) PenaltySpec::elastic_net(0.0, a).validate();

    const auto fold = assign_folds(static_cast<std::size_t>(train.rows()), opts);
    const int K = opts.folds;
    std::vector<DesignMatrix> fit_sets, val_sets;
    for (int f = 0; f < K; ++f) {
        std::vector<Index> in, out;
        for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? out : in).push_back(static_cast<Index>(i));
        fit_sets.push_back(train.subset(in));
        val_sets.push_back(train.subset(out));
    }

    CvResult res;
    const std::size_t A = alphas.size();
    res.table.resize(lambda_grid.size() * A);

    // One task per (alpha, fold): walk lambda from large to small, each fit
    // warm-started from the previous one.
    std::vector<std::size_t> by_lambda(lambda_grid.size());
    for (std::size_t i = 0; i < by_lambda.size(); ++i) by_lambda[i] = i;
    std::stable_sort(by_lambda.begin(), by_lambda.end(),
                     [&](std::size_t a, std::size_t b) { return lambda_grid[a] > lambda_grid[b]; });
    struct FoldScore {
        double mse = 0.0;
        std::optional<double> r2;
        std::string error;
    };
    std::vector<FoldScore> scores(res.table.size() * static_cast<std::size_t>(K));
    detail::parallel_for(A * static_cast<std::size_t>(K), opts.threads, [&](std::size_t task) {
        const std::size_t a = task / static_cast<std::size_t>(K);
        const auto f = static_cast<std::size_t>(task % static_cast<std::size_t>(K));
        const auto& fit_set = fit_sets[f];
        const auto& val = val_sets[f];
        VectorXd warm;
        const FoldScore* prev = nullptr;
        double prev_lambda = 0.0;
        for (std::size_t li : by_lambda) {
            auto& score = scores[(li * A + a) * static_cast<std::size_t>(K) + f];
            // repeated grid values share one fit
            if (prev && lambda_grid[li] == prev_lambda) {
                score = *prev;
                continue;
            }
            prev = &score;
            prev_lambda = lambda_grid[li];
            try {
                FittedModel model;
                if (kind == PenaltyKind::Ridge) {
                    model = fit_ridge(fit_set, lambda_grid[li]);
                } else {
                    model = fit_elastic_net(fit_set, lambda_grid[li], alphas[a], opts.solver,
                                            warm.size() ? &warm : nullptr);
                    warm = model.coefficients;
                    if (!model.diagnostics.converged) throw NumericalError("coordinate descent did not converge");
                }
                const VectorXd pred = predict_design(model, val.X);
                score.mse = metric_mse(val.y, pred);
                if ((val.y.array() - val.y.mean()).square().sum() > 0) score.r2 = metric_r2(val.y, pred);
            } catch (const NumericalError& e) {
                score.error = e.what();
            }
        }
    });

    for (std::size_t c = 0; c < res.table.size(); ++c) {
        CvCell& cell = res.table[c];
        cell.lambda = lambda_grid[c / A];
        cell.alpha = alphas[c % A];
        double mse_sum = 0.0, r2_sum = 0.0;
        int r2_count = 0;
        for (int f = 0; f < K; ++f) {
            const auto& score = scores[c * static_cast<std::size_t>(K) + static_cast<std::size_t>(f)];
            if (!score.error.empty()) {
                cell.failed = true;
                cell.error = score.error;
                break;
            }
            cell.fold_mse.push_back(score.mse);
            mse_sum += score.mse;
            if (score.r2) {
                r2_sum += *score.r2;
                ++r2_count;
            }
        }
        if (cell.failed) {
            cell.fold_mse.clear();
            cell.mean_mse = std::numeric_limits<double>::infinity();
            cell.mean_r2 = std::numeric_limits<double>::quiet_NaN();
        } else {
            cell.mean_mse = mse_sum / static_cast<double>(K);
            cell.mean_r2 = r2_count > 0 ? r2_sum / r2_count : std::numeric_limits<double>::quiet_NaN();
        }
    }

    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < res.table.size(); ++c) {
        const auto& cell = res.table[c];
        if (cell.failed) continue;
        if (!best) {
            best = c;
            continue;
        }
        const auto& b = res.table[*best];
        if (cell.mean_mse < b.mean_mse ||
            (cell.mean_mse == b.mean_mse &&
             (cell.lambda > b.lambda || (cell.lambda == b.lambda && cell.alpha > b.alpha))))
            best = c;
    }
    if (!best) throw NumericalError("every cross-validation cell failed: " + res.table.front().error);
    res.best_index = *best;
    res.best_lambda = res.table[*best].lambda;
    res.best_alpha = res.table[*best].alpha;
    return res;
}

// ---------------------------------------------------------------------------

double source_relative_error(double predicted_log, double actual_log, const TransformSpec& spec) {
    const double actual = inverse_log_value(actual_log, spec);
    const double predicted = inverse_log_value(predicted_log, spec);
    if (!(actual > 0)) return std::numeric_limits<double>::quiet_NaN();
    return std::abs(predicted - actual) / actual;
}

ForecastSummary summarize_forecast(const std::vector<ForecastRow>& rows) {
    ForecastSummary s;
    std::vector<double> diff, y, yhat, rel;
    for (const auto& r : rows) {
        if (!r.actual_log) continue;
        diff.push_back(r.predicted_log - *r.actual_log);
        y.push_back(*r.actual_log);
        yhat.push_back(r.predicted_log);
        if (r.relative_error && std::isfinite(*r.relative_error)) rel.push_back(*r.relative_error);
    }
    s.n_scored = diff.size();
    if (diff.empty()) return s;
    const double n = static_cast<double>(diff.size());
    double sum = 0.0;
    for (double d : diff) sum += d;
    s.mean_error = sum / n;
    double ss = 0.0;
    for (double d : diff) ss += (d - s.mean_error) * (d - s.mean_error);
    s.error_variance = ss / n;
    const Eigen::Map<const VectorXd> ya(y.data(), static_cast<Index>(y.size()));
    const Eigen::Map<const VectorXd> yh(yhat.data(), static_cast<Index>(yhat.size()));
    s.mse = metric_mse(ya, yh);
    if ((ya.array() - ya.mean()).square().sum() > 0) s.r2 = metric_r2(ya, yh);
    if (!rel.empty()) {
        double t = 0.0;
        for (double r : rel) t += r;
        s.mean_relative_error = t / static_cast<double>(rel.size());
    }
    return s;
}

std::vector<ForecastRow> forecast_report(const VectorXd& predicted_log, const PanelDataset& test_log,
                                         const std::vector<int>& clusters, const TransformSpec& transform) {
    if (static_cast<std::size_t>(predicted_log.size()) != test_log.size() || clusters.size() != test_log.size())
        throw InputError("forecast inputs are not aligned with the test rows");
    std::vector<ForecastRow> rows;
    rows.reserve(test_log.size());
    for (std::size_t i = 0; i < test_log.size(); ++i) {
        const auto& o = test_log.observations[i];
        ForecastRow r;
        r.entity = test_log.entities[o.entity];
        r.period = test_log.periods[o.period];
        r.cluster = clusters[i];
        r.predicted_log = predicted_log(static_cast<Index>(i));
        if (!std::isfinite(r.predicted_log)) throw NumericalError("non-finite forecast for " + r.entity + "/" + r.period);
        r.predicted_source = inverse_log_value(r.predicted_log, transform);
        if (o.target) {
            r.actual_log = *o.target;
            r.actual_source = inverse_log_value(*o.target, transform);
            const double rel = source_relative_error(r.predicted_log, *o.target, transform);
            if (std::isfinite(rel)) r.relative_error = rel;
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g;
    for (int i = 0; i < n; ++i)
        g.push_back(std::exp(std::log(hi) + (std::log(lo) - std::log(hi)) * i / (n - 1)));
    return g;
}

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("stage ") + name + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(std::string("stage ") + name + ": " + e.what());
    }
}

MatrixXd regression_rows(const PanelDataset& log_rows, const DummyLayout& layout, const std::vector<int>& labels) {
    const MatrixXd F = log_rows.feature_matrix();
    const MatrixXd D = dummy_block(layout, labels);
    MatrixXd X(F.rows(), F.cols() + D.cols());
    X << F, D;
    return X;
}

}  // namespace

void DprConfig::finalize() {
    if (lambda_grid.empty()) {
        if (penalty_kind == PenaltyKind::Ridge) {
            for (int i = 50; i >= 0; --i) lambda_grid.push_back(i * 0.01);
        } else {
            lambda_grid = log_grid(1e-5, 1.0, 41);
        }
    }
    if (alpha_grid.empty()) {
        if (penalty_kind == PenaltyKind::ElasticNet)
            for (int i = 1; i <= 10; ++i) alpha_grid.push_back(i / 10.0);
        else
            alpha_grid = {penalty_kind == PenaltyKind::Lasso ? 1.0 : 0.0};
    }
    for (double l : lambda_grid)
        if (!(l >= 0) || !std::isfinite(l)) throw InputError("lambda grid values must be finite and >= 0");
    for (double a : alpha_grid)
        if (!(a >= 0 && a <= 1)) throw InputError("alpha grid values must lie in [0, 1]");
    if (dbscan) dbscan->validate();
    if (use_clusters && !dbscan && eps_grid.empty() && !eps_quantiles)
        throw InputError("clustering needs eps, an eps grid or eps quantiles");
    if (min_pts_grid.empty()) throw InputError("min_pts grid is empty");
    if (cv_folds < 2) throw InputError("cv_folds must be >= 2");
    if (!(transform.log_offset >= 0)) throw InputError("log_offset must be >= 0");
}

TrainingClusters cluster_training(const PanelDataset& train_source, const DprConfig& config) {
    TrainingClusters tc;
    tc.entity_max = entity_column_max(train_source);
    tc.points = energy_mix_features(train_source, config.transform.normalize_mode, &tc.entity_max).values;
    DbscanParams params;
    if (config.dbscan) {
        params = *config.dbscan;
    } else {
        std::vector<double> eps = config.eps_grid;
        if (eps.empty() && config.eps_quantiles) {
            const auto& q = *config.eps_quantiles;
            eps = k_distance_eps_grid(tc.points, config.min_pts_grid.front(), q.lo, q.hi, q.count);
        }
        tc.scan = scan_params(tc.points, eps, config.min_pts_grid, config.core_strict, config.threads);
        const auto best = best_scan_row(tc.scan);
        if (!best) throw InputError("no scanned (eps, min_pts) pair yields a defined silhouette");
        params = DbscanParams{tc.scan[*best].eps, tc.scan[*best].min_pts, config.core_strict};
    }
    tc.model = dbscan(tc.points, params);
    return tc;
}

TrainingArtifacts prepare_training(const PanelDataset& train_source, const DprConfig& config) {
    TrainingArtifacts art;
    stage("transform", [&] {
        train_source.validate();
        if (!train_source.all_targets_present()) throw InputError("every training row needs a target");
        art.train_log = log_transform(train_source, config.transform);
    });

    std::vector<int> labels;
    stage("cluster", [&] {
        if (!config.use_clusters) {
            art.clusters.k = train_source.size() > 0 ? 1 : 0;
            art.clusters.labels.assign(train_source.size(), 0);
            art.clusters.core.assign(train_source.size(), true);
            labels = art.clusters.labels;
            return;
        }
        auto tc = cluster_training(train_source, config);
        art.entity_max = std::move(tc.entity_max);
        art.cluster_points = std::move(tc.points);
        art.scan = std::move(tc.scan);
        art.clusters = std::move(tc.model);
        labels = art.clusters.labels;
    });

    stage("design", [&] {
        auto base = make_design(art.train_log.feature_matrix(), art.train_log.target_vector(),
                                art.train_log.feature_names);
        const int baseline = art.clusters.k > 0 ? config.baseline_cluster : 0;
        art.augmented = augment_with_dummies(base, labels, config.outlier_policy, baseline);
        art.design = standardize(art.augmented.design.X, art.augmented.design.y, art.augmented.design.column_names);
    });

    return art;
}

void tune_penalty(TrainingArtifacts& art, const DprConfig& config) {
    stage("cv", [&] {
        CvOptions opts;
        opts.folds = config.cv_folds;
        opts.mode = config.fold_mode;
        opts.solver = config.solver;
        opts.threads = config.threads;
        for (Index r : art.augmented.kept_rows)
            opts.row_periods.push_back(art.train_log.observations[static_cast<std::size_t>(r)].period);
        art.cv = cross_validate(art.design, config.penalty_kind, config.lambda_grid, config.alpha_grid, opts);
    });
}

void fit_final(TrainingArtifacts& art, const DprConfig& config, const PenaltySpec& penalty) {
    stage("fit", [&] {
        art.model = fit(art.design, penalty, config.solver);
        if (!art.model.diagnostics.converged)
            throw NumericalError("coordinate descent did not converge within " +
                                 std::to_string(config.solver.max_iter) + " sweeps");
    });
}

void compute_path(TrainingArtifacts& art, const DprConfig& config, double alpha) {
    art.path.clear();
    art.path_lambdas.clear();
    stage("path", [&] {
        std::vector<double> grid = config.lambda_grid;
        std::sort(grid.begin(), grid.end(), std::greater<>());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        const VectorXd* warm = nullptr;
        for (double lambda : grid) {
            try {
                FittedModel m = alpha == 0.0 ? fit_ridge(art.design, lambda)
                                             : fit_elastic_net(art.design, lambda, alpha, config.solver, warm);
                art.path.push_back(std::move(m));
                art.path_lambdas.push_back(lambda);
                warm = &art.path.back().coefficients;
            } catch (const NumericalError&) {
                // lambda = 0 on a rank-deficient design has no unique solution; leave it off the path
            }
        }
    });
}

TrainingArtifacts train_dpr(const PanelDataset& train_source, const DprConfig& config) {
    TrainingArtifacts art = prepare_training(train_source, config);
    tune_penalty(art, config);
    fit_final(art, config, PenaltySpec{config.penalty_kind, art.cv.best_lambda, art.cv.best_alpha});
    compute_path(art, config, art.model.penalty.l1_ratio());
    return art;
}

PipelineModel make_pipeline_model(const TrainingArtifacts& art, const DprConfig& config) {
    PipelineModel pm;
    pm.transform = config.transform;
    pm.use_clusters = config.use_clusters;
    pm.feature_names = art.train_log.feature_names;
    pm.entity_max = art.entity_max;
    pm.dbscan = art.clusters.params;
    pm.layout = art.augmented.layout;
    pm.model = art.model;
    if (config.use_clusters) {
        std::vector<Index> cores;
        for (std::size_t i = 0; i < art.clusters.core.size(); ++i)
            if (art.clusters.core[i]) cores.push_back(static_cast<Index>(i));
        pm.core_points.resize(static_cast<Index>(cores.size()), art.cluster_points.cols());
        for (std::size_t c = 0; c < cores.size(); ++c) {
            pm.core_points.row(static_cast<Index>(c)) = art.cluster_points.row(cores[c]);
            pm.core_labels.push_back(art.clusters.labels[static_cast<std::size_t>(cores[c])]);
        }
    }
    return pm;
}

ScoredRows score_rows(const PipelineModel& pm, const PanelDataset& rows_source) {
    if (rows_source.feature_names != pm.feature_names)
        throw InputError("rows to score have different feature columns than the training data");
    ScoredRows s;
    const auto rows_log = log_transform(rows_source, pm.transform);
    if (pm.use_clusters) {
        const auto mix = energy_mix_features(rows_source, pm.transform.normalize_mode, &pm.entity_max);
        ClusterModel cores;
        cores.params = pm.dbscan;
        cores.labels = pm.core_labels;
        cores.core.assign(pm.core_labels.size(), true);
        s.clusters = assign_to_clusters(cores, pm.core_points, mix.values);
    } else {
        s.clusters.assign(rows_source.size(), 0);
    }
    s.design_rows = regression_rows(rows_log, pm.layout, s.clusters);
    s.predicted_log = predict(pm.model, s.design_rows);
    return s;
}

ScoredRows score_rows(const TrainingArtifacts& art, const DprConfig& config, const PanelDataset& rows_source) {
    return score_rows(make_pipeline_model(art, config), rows_source);
}

StageMetrics stage_metrics(const VectorXd& y, const VectorXd& yhat, double sparsity) {
    StageMetrics m;
    m.n = static_cast<std::size_t>(y.size());
    m.sparsity = sparsity;
    m.mse = metric_mse(y, yhat);
    m.r2 = (y.array() - y.mean()).square().sum() > 0 ? metric_r2(y, yhat) : std::numeric_limits<double>::quiet_NaN();
    return m;
}

std::vector<FittedRow> fitted_rows(const TrainingArtifacts& art) {
    std::vector<FittedRow> rows;
    const VectorXd fitted = predict_design(art.model, art.design.X);
    for (Index r = 0; r < art.design.rows(); ++r) {
        const auto src = static_cast<std::size_t>(art.augmented.kept_rows[static_cast<std::size_t>(r)]);
        const auto& o = art.train_log.observations[src];
        rows.push_back(FittedRow{art.train_log.entities[o.entity], art.train_log.periods[o.period],
                                 art.clusters.labels[src], art.design.y(r), fitted(r), art.design.y(r) - fitted(r)});
    }
    return rows;
}

RunReport run_dpr(const PanelDataset& data, const DprConfig& config_in, const SplitSpec& split) {
    RunReport rep;
    rep.config = config_in;
    stage("config", [&] { rep.config.finalize(); });
    const DprConfig& config = rep.config;
    rep.split = split;

    auto [train, test] = stage("split", [&] {
        data.validate();
        return chronological_split(data, split);
    });
    rep.train = train_dpr(train, config);
    const auto& art = rep.train;

    const VectorXd fitted = predict_design(art.model, art.design.X);
    rep.fitted = fitted_rows(art);
    rep.train_metrics = stage_metrics(art.design.y, fitted, art.model.diagnostics.sparsity);
    const auto& best = art.cv.table[art.cv.best_index];
    rep.cv_metrics.n = static_cast<std::size_t>(art.design.rows());
    rep.cv_metrics.mse = best.mean_mse;
    rep.cv_metrics.r2 = best.mean_r2;
    rep.cv_metrics.sparsity = art.model.diagnostics.sparsity;

    if (config.validation_periods > 0) {
        stage("validation", [&] {
            const auto inner = SplitSpec::last_periods(train, config.validation_periods, config.cv_folds);
            auto [fit_part, holdout] = chronological_split(train, inner);
            const auto inner_art = train_dpr(fit_part, config);
            const auto scored = score_rows(inner_art, config, holdout);
            const VectorXd y = log_transform(holdout, config.transform).target_vector();
            rep.validation_metrics = stage_metrics(y, scored.predicted_log, inner_art.model.diagnostics.sparsity);
        });
    }

    stage("forecast", [&] {
        const auto scored = score_rows(art, config, test);
        const auto test_log = log_transform(test, config.transform);
        rep.forecast = forecast_report(scored.predicted_log, test_log, scored.clusters, config.transform);
        rep.forecast_summary = summarize_forecast(rep.forecast);
        if (rep.forecast_summary.n_scored > 0) {
            StageMetrics m;
            m.n = rep.forecast_summary.n_scored;
            m.mse = *rep.forecast_summary.mse;
            m.r2 = rep.forecast_summary.r2.value_or(std::numeric_limits<double>::quiet_NaN());
            m.sparsity = art.model.diagnostics.sparsity;
            rep.test_metrics = m;
        }
    });

    if (config.refit_clusters_full && config.use_clusters) {
        stage("refit-clusters-full", [&] {
            const auto full_max = entity_column_max(data);
            const auto pts = energy_mix_features(data, config.transform.normalize_mode, &full_max).values;
            rep.full_clusters = dbscan(pts, art.clusters.params);
            rep.full_entities = data.entities;
            rep.full_periods = data.periods;
        });
    }
    return rep;
}

}  // namespace dpr
