#include "cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <list>
#include <map>
#include <ostream>
#include <sstream>

#include "dpr/config.hpp"
#include "dpr/errors.hpp"
#include "dpr/format.hpp"
#include "dpr/report.hpp"
#include "testkit.hpp"

namespace dpr::cli {

namespace {

using Files = std::vector<std::pair<std::string, std::string>>;

template <class Fn>
std::string render(Fn&& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

std::string opt_text(const std::optional<double>& v) { return v ? fmt_real(*v) : "undefined"; }

// Config keys reachable from the command line. Flags are applied after the
// config file, so they win.
struct KeyFlag {
    const char* flag;
    const char* key;
    const char* help;
};

const KeyFlag kValueFlags[] = {
    {"--input", "input", "panel file (delimited, header row)"},
    {"--factors", "factors", "emission factor table; the target becomes sum(feature * factor)"},
    {"--delimiter", "delimiter", "comma, tab, semicolon or a single character"},
    {"--entity-col", "entity_col", "entity column name"},
    {"--period-col", "period_col", "period column name"},
    {"--target-col", "target_col", "target column name"},
    {"--features", "features", "comma separated feature columns (default: all others)"},
    {"--log-offset", "log_offset", "c in ln(x + c)"},
    {"--normalize", "normalize_mode", "raw_shares, per_feature_max or none"},
    {"--eps", "eps", "DBSCAN radius"},
    {"--min-pts", "min_pts", "DBSCAN density threshold"},
    {"--eps-grid", "eps_grid", "eps values to scan"},
    {"--eps-quantiles", "eps_quantiles", "lo:hi:count, eps grid from the k-distance profile"},
    {"--minpts-grid", "minpts_grid", "min_pts values to scan"},
    {"--kind", "penalty_kind", "ridge, lasso or elastic_net"},
    {"--lambda", "lambda_grid", "a single lambda"},
    {"--lambda-grid", "lambda_grid", "lambda values"},
    {"--alpha", "alpha_grid", "a single alpha"},
    {"--alpha-grid", "alpha_grid", "alpha values"},
    {"--outlier-policy", "outlier_policy", "unique_dummy or exclude"},
    {"--baseline", "baseline_cluster", "cluster without a dummy column"},
    {"--test-periods", "test_periods", "trailing periods held out as the test side"},
    {"--validation-periods", "validation_periods", "trailing training periods scored as validation"},
    {"--folds", "cv_folds", "cross-validation folds"},
    {"--fold-mode", "fold_mode", "rows or periods"},
    {"--tol", "tol", "coordinate descent tolerance"},
    {"--max-iter", "max_iter", "coordinate descent sweep limit"},
    {"--threads", "threads", "worker threads for grid and CV cells"},
};

const KeyFlag kBoolFlags[] = {
    {"--core-strict", "core_strict", "core iff the neighbourhood is strictly larger than min_pts"},
    {"--refit-clusters-full", "refit_clusters_full", "also cluster every period for interpretation"},
    {"--no-clusters", "use_clusters", "skip clustering and dummies"},
};

struct PipelineArgs {
    std::string config;
    std::string schema;
    std::string out;
    std::map<std::string, std::string> values;  // flag -> raw text
    std::map<std::string, bool> flags;
    std::string model;  // forecast only
};

void add_pipeline_options(CLI::App* app, PipelineArgs& a) {
    app->add_option("--config", a.config, "key = value config file");
    app->add_option("--schema", a.schema, "key = value file with input column mapping");
    app->add_option("--out", a.out, "output directory (replaced atomically)")->required();
    for (const auto& f : kValueFlags) app->add_option(f.flag, a.values[f.flag], f.help);
    for (const auto& f : kBoolFlags) app->add_flag(f.flag, a.flags[f.flag], f.help);
}

RunConfig build_config(CLI::App* app, const PipelineArgs& a) {
    RunConfig rc;
    if (!a.config.empty()) rc.apply_file(a.config);
    if (!a.schema.empty()) rc.apply_file(a.schema);
    for (const auto& f : kValueFlags)
        if (app->count(f.flag) > 0) rc.set(f.key, a.values.at(f.flag));
    for (const auto& f : kBoolFlags)
        if (a.flags.at(f.flag)) rc.set(f.key, std::string(f.key) == "use_clusters" ? "false" : "true");
    return rc;
}

PanelDataset load_input(const RunConfig& rc) {
    if (rc.input.empty()) throw InputError("no input panel (use --input or 'input =' in the config)");
    auto data = load_panel_file(rc.input, rc.schema);
    if (!rc.factors.empty()) {
        std::ifstream in(rc.factors);
        if (!in) throw InputError("cannot open factor table '" + rc.factors + "'");
        data = compute_emissions(data, load_factor_table(in, rc.schema.delimiter));
    }
    return data;
}

PanelDataset training_rows(const PanelDataset& data, const RunConfig& rc) {
    if (rc.test_periods == 0) return data;
    return chronological_split(data, SplitSpec::last_periods(data, rc.test_periods, rc.dpr.cv_folds)).first;
}

PanelDataset test_rows(const PanelDataset& data, const RunConfig& rc) {
    if (rc.test_periods == 0) return data;
    return chronological_split(data, SplitSpec::last_periods(data, rc.test_periods, rc.dpr.cv_folds)).second;
}

std::string k_distance_csv(const Eigen::MatrixXd& points, int min_pts) {
    const int k = std::max(1, min_pts - 1);
    std::vector<double> kd;
    if (points.rows() > k) kd = k_distance_profile(points, k);
    return render([&](std::ostream& os) { write_k_distance(os, kd); });
}

std::string metrics_text(const StageMetrics& m) {
    return "n=" + std::to_string(m.n) + " r2=" + fmt_real(m.r2) + " mse=" + fmt_real(m.mse) +
           " sparsity=" + fmt_real(m.sparsity);
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_ingest(const RunConfig& rc, const std::string& out_dir, std::ostream& out) {
    const auto data = load_input(rc);
    data.validate();
    std::size_t with_target = 0;
    for (const auto& o : data.observations) with_target += o.target.has_value();
    write_directory_atomically(out_dir,
                               {{"panel.csv", render([&](std::ostream& os) { write_panel(os, data); })}});
    out << "ingest rows=" << data.size() << " entities=" << data.entities.size()
        << " periods=" << data.periods.size() << " features=" << data.n_features() << " targets=" << with_target
        << '\n';
}

void cmd_cluster(RunConfig rc, const std::string& out_dir, std::ostream& out) {
    if (!rc.dpr.use_clusters) throw InputError("cluster: clustering is switched off");
    rc.dpr.finalize();
    const auto train = training_rows(load_input(rc), rc);
    const auto tc = cluster_training(train, rc.dpr);
    Files files;
    files.emplace_back("clusters.csv", render([&](std::ostream& os) { write_cluster_table(os, train, tc.model); }));
    files.emplace_back("k_distance.csv", k_distance_csv(tc.points, tc.model.params.min_pts));
    if (!tc.scan.empty())
        files.emplace_back("scan.csv", render([&](std::ostream& os) { write_scan_table(os, tc.scan); }));
    write_directory_atomically(out_dir, files);
    out << "cluster rows=" << train.size() << " eps=" << fmt_real(tc.model.params.eps)
        << " min_pts=" << tc.model.params.min_pts << " k=" << tc.model.k << " noise=" << tc.model.noise_count()
        << " sc=" << opt_text(tc.model.sc) << " sse=" << fmt_real(tc.model.sse) << '\n';
}

void cmd_scan(RunConfig rc, const std::string& out_dir, std::ostream& out) {
    if (rc.dpr.eps_grid.empty() && !rc.dpr.eps_quantiles) throw InputError("scan: needs --eps-grid or --eps-quantiles");
    if (rc.dpr.min_pts_grid.empty()) throw InputError("scan: needs --minpts-grid");
    const auto train = training_rows(load_input(rc), rc);
    const auto max = entity_column_max(train);
    const auto points = energy_mix_features(train, rc.dpr.transform.normalize_mode, &max).values;
    auto eps = rc.dpr.eps_grid;
    if (eps.empty()) {
        const auto& q = *rc.dpr.eps_quantiles;
        eps = k_distance_eps_grid(points, rc.dpr.min_pts_grid.front(), q.lo, q.hi, q.count);
    }
    const auto rows = scan_params(points, eps, rc.dpr.min_pts_grid, rc.dpr.core_strict, rc.dpr.threads);
    const auto best = best_scan_row(rows);
    const int kd_pts = best ? rows[*best].min_pts : rc.dpr.min_pts_grid.front();
    write_directory_atomically(out_dir,
                               {{"scan.csv", render([&](std::ostream& os) { write_scan_table(os, rows); })},
                                {"k_distance.csv", k_distance_csv(points, kd_pts)}});
    out << "scan rows=" << rows.size();
    if (best)
        out << " best_eps=" << fmt_real(rows[*best].eps) << " best_min_pts=" << rows[*best].min_pts
            << " best_k=" << rows[*best].k << " best_noise=" << rows[*best].noise
            << " best_sc=" << opt_text(rows[*best].sc);
    else
        out << " best=undefined";
    out << '\n';
}

double single_value(const std::vector<double>& grid, const char* what) {
    if (grid.size() != 1) throw InputError(std::string("needs a single ") + what);
    return grid.front();
}

double chosen_alpha(const DprConfig& c) {
    switch (c.penalty_kind) {
        case PenaltyKind::Ridge: return 0.0;
        case PenaltyKind::Lasso: return 1.0;
        case PenaltyKind::ElasticNet: return single_value(c.alpha_grid, "--alpha for elastic_net");
    }
    return 0.0;
}

void cmd_fit(RunConfig rc, bool alpha_given, const std::string& out_dir, std::ostream& out) {
    if (rc.dpr.penalty_kind == PenaltyKind::ElasticNet && !alpha_given)
        throw InputError("fit: elastic_net needs --alpha");
    rc.dpr.finalize();
    const double lambda = single_value(rc.dpr.lambda_grid, "--lambda");
    const double alpha = chosen_alpha(rc.dpr);
    auto art = prepare_training(training_rows(load_input(rc), rc), rc.dpr);
    fit_final(art, rc.dpr, PenaltySpec{rc.dpr.penalty_kind, lambda, alpha});
    const auto fitted = fitted_rows(art);
    Files files;
    files.emplace_back("train_clusters.csv",
                       render([&](std::ostream& os) { write_cluster_table(os, art.train_log, art.clusters); }));
    files.emplace_back("standardization.csv", render([&](std::ostream& os) { write_standardization(os, art.design); }));
    files.emplace_back("coefficients.csv", render([&](std::ostream& os) { write_coefficients(os, art.model); }));
    files.emplace_back("fitted.csv", render([&](std::ostream& os) { write_fitted(os, fitted); }));
    files.emplace_back("model.txt",
                       render([&](std::ostream& os) { save_pipeline_model(os, make_pipeline_model(art, rc.dpr)); }));
    write_directory_atomically(out_dir, files);
    const auto& d = art.model.diagnostics;
    out << "fit kind=" << to_string(rc.dpr.penalty_kind) << " lambda=" << fmt_real(lambda)
        << " alpha=" << fmt_real(art.model.penalty.l1_ratio()) << " rows=" << art.design.rows()
        << " columns=" << art.design.cols() << " r2=" << fmt_real(d.r2) << " mse=" << fmt_real(d.mse)
        << " sparsity=" << fmt_real(d.sparsity) << " iterations=" << d.iterations << '\n';
}

void cmd_path(RunConfig rc, bool alpha_given, const std::string& out_dir, std::ostream& out) {
    if (rc.dpr.penalty_kind == PenaltyKind::ElasticNet && !alpha_given)
        throw InputError("path: elastic_net needs --alpha");
    rc.dpr.finalize();
    const double alpha = chosen_alpha(rc.dpr);
    auto art = prepare_training(training_rows(load_input(rc), rc), rc.dpr);
    compute_path(art, rc.dpr, alpha);
    write_directory_atomically(out_dir, {{"path_trajectories.csv", render([&](std::ostream& os) {
                                              write_path_trajectories(os, art.path_lambdas, art.path);
                                          })}});
    out << "path kind=" << to_string(rc.dpr.penalty_kind) << " alpha=" << fmt_real(alpha)
        << " points=" << art.path.size() << " columns=" << art.design.cols() << '\n';
}

void cmd_cv(RunConfig rc, const std::string& out_dir, std::ostream& out) {
    rc.dpr.finalize();
    auto art = prepare_training(training_rows(load_input(rc), rc), rc.dpr);
    tune_penalty(art, rc.dpr);
    write_directory_atomically(out_dir,
                               {{"cv_table.csv", render([&](std::ostream& os) { write_cv_table(os, art.cv); })}});
    const auto& best = art.cv.table[art.cv.best_index];
    out << "cv kind=" << to_string(rc.dpr.penalty_kind) << " folds=" << rc.dpr.cv_folds
        << " cells=" << art.cv.table.size() << " best_lambda=" << fmt_real(art.cv.best_lambda)
        << " best_alpha=" << fmt_real(art.cv.best_alpha) << " mean_mse=" << fmt_real(best.mean_mse)
        << " mean_r2=" << fmt_real(best.mean_r2) << '\n';
}

void cmd_run(const RunConfig& rc, const std::string& out_dir, std::ostream& out) {
    if (rc.test_periods == 0) throw InputError("run: needs test_periods >= 1");
    const auto data = load_input(rc);
    const auto split = SplitSpec::last_periods(data, rc.test_periods, rc.dpr.cv_folds);
    const auto rep = run_dpr(data, rc.dpr, split);
    write_report(rep, data, out_dir);

    const auto& art = rep.train;
    const auto& c = art.clusters;
    out << "split train_periods=" << rep.split.train_periods.size()
        << " test_periods=" << rep.split.test_periods.size() << " train_rows=" << art.train_log.size()
        << " test_rows=" << rep.forecast.size() << '\n';
    if (rep.config.use_clusters)
        out << "cluster eps=" << fmt_real(c.params.eps) << " min_pts=" << c.params.min_pts << " k=" << c.k
            << " noise=" << c.noise_count() << " sc=" << opt_text(c.sc) << " dummies=" << art.augmented.layout.width()
            << '\n';
    out << "cv best_lambda=" << fmt_real(art.cv.best_lambda) << " best_alpha=" << fmt_real(art.cv.best_alpha) << ' '
        << metrics_text(rep.cv_metrics) << '\n';
    out << "fit kind=" << to_string(rep.config.penalty_kind) << " iterations=" << art.model.diagnostics.iterations
        << ' ' << metrics_text(rep.train_metrics) << '\n';
    if (rep.validation_metrics) out << "validation " << metrics_text(*rep.validation_metrics) << '\n';
    const auto& s = rep.forecast_summary;
    out << "forecast rows=" << rep.forecast.size() << " scored=" << s.n_scored
        << " mean_error=" << fmt_real(s.mean_error) << " error_variance=" << fmt_real(s.error_variance)
        << " r2=" << opt_text(s.r2) << " mse=" << opt_text(s.mse) << '\n';
    if (rep.full_clusters)
        out << "refit-clusters-full k=" << rep.full_clusters->k << " noise=" << rep.full_clusters->noise_count()
            << " sc=" << opt_text(rep.full_clusters->sc) << '\n';
}

void cmd_forecast(const RunConfig& rc, const std::string& model_path, const std::string& out_dir,
                  std::ostream& out) {
    std::ifstream in(model_path);
    if (!in) throw InputError("cannot open model file '" + model_path + "'");
    const auto pm = load_pipeline_model(in);
    const auto rows = test_rows(load_input(rc), rc);
    const auto scored = score_rows(pm, rows);
    const auto report = forecast_report(scored.predicted_log, log_transform(rows, pm.transform), scored.clusters,
                                        pm.transform);
    const auto summary = summarize_forecast(report);
    write_directory_atomically(
        out_dir, {{"forecast.csv", render([&](std::ostream& os) { write_forecast(os, report); })},
                  {"forecast_summary.csv", render([&](std::ostream& os) { write_forecast_summary(os, summary); })}});
    out << "forecast rows=" << report.size() << " scored=" << summary.n_scored
        << " mean_error=" << fmt_real(summary.mean_error) << " error_variance=" << fmt_real(summary.error_variance)
        << " r2=" << opt_text(summary.r2) << " mse=" << opt_text(summary.mse) << '\n';
}

void cmd_synth(const std::string& spec_path, const std::string& preset, std::optional<long long> seed,
               const std::string& out_dir, std::ostream& out) {
    std::string text;
    if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) throw InputError("cannot open synthetic spec '" + spec_path + "'");
        text.assign(std::istreambuf_iterator<char>(in), {});
    } else {
        text = "preset = " + preset + "\n";
    }
    if (seed) text += "\nseed = " + std::to_string(*seed) + "\n";
    std::istringstream spec_in(text);
    const auto spec = testkit::parse_synthetic_spec(spec_in);
    const auto panel = testkit::generate_panel(spec);

    Files files;
    files.emplace_back("panel.csv", render([&](std::ostream& os) { write_panel(os, panel.data); }));
    files.emplace_back("truth_clusters.csv", render([&](std::ostream& os) {
                           TableWriter w(os);
                           w.header({"entity", "period", "cluster"});
                           for (std::size_t i = 0; i < panel.data.size(); ++i) {
                               const auto& o = panel.data.observations[i];
                               w.cell(panel.data.entities[o.entity]).cell(panel.data.periods[o.period]);
                               w.cell(panel.labels[i]).end_row();
                           }
                       }));
    files.emplace_back("truth_coefficients.csv", render([&](std::ostream& os) {
                           TableWriter w(os);
                           w.header({"term", "coefficient"});
                           for (Eigen::Index j = 0; j < panel.coefficients.size(); ++j)
                               w.cell(panel.data.feature_names[static_cast<std::size_t>(j)])
                                   .cell(panel.coefficients(j))
                                   .end_row();
                           for (std::size_t c = 0; c < panel.offsets.size(); ++c)
                               w.cell("offset_" + std::to_string(c)).cell(panel.offsets[c]).end_row();
                       }));
    write_directory_atomically(out_dir, files);
    out << "synth rows=" << panel.data.size() << " entities=" << panel.data.entities.size()
        << " periods=" << panel.data.periods.size() << " features=" << panel.data.n_features()
        << " clusters=" << spec.n_clusters << " seed=" << spec.seed << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Density-based clustering plus penalized panel regression"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    struct Sub {
        CLI::App* app;
        PipelineArgs args;
    };
    std::list<Sub> subs;  // stable addresses for option storage
    const auto add = [&](const char* name, const char* desc) -> Sub& {
        subs.push_back(Sub{app.add_subcommand(name, desc), {}});
        add_pipeline_options(subs.back().app, subs.back().args);
        return subs.back();
    };
    auto& ingest = add("ingest", "load and validate a panel, write it in canonical form");
    auto& cluster = add("cluster", "DBSCAN over the training rows' energy mix");
    auto& scan = add("scan", "silhouette and SSE over an (eps, min_pts) grid");
    auto& fitc = add("fit", "fit one penalized model on the training rows");
    auto& path = add("path", "coefficient trajectories over a lambda grid");
    auto& cv = add("cv", "cross-validated grid search");
    auto& runc = add("run", "the full pipeline, written as a report directory");
    auto& forecast = add("forecast", "score rows with a saved model");
    forecast.app->add_option("--model", forecast.args.model, "model.txt from fit or run")->required();

    std::string synth_spec, synth_out, synth_preset = "six_cluster";
    long long synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "write a synthetic panel with its ground truth");
    synth->add_option("--spec", synth_spec, "key = value synthetic spec");
    synth->add_option("--preset", synth_preset, "six_cluster or collinear, when no spec is given");
    auto* seed_opt = synth->add_option("--seed", synth_seed, "random seed (overrides the spec)");
    synth->add_option("--out", synth_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (synth->parsed()) {
            std::optional<long long> seed;
            if (seed_opt->count() > 0) seed = synth_seed;
            cmd_synth(synth_spec, synth_preset, seed, synth_out, out);
            return 0;
        }
        for (auto& s : subs) {
            if (!s.app->parsed()) continue;
            RunConfig rc = build_config(s.app, s.args);
            const bool alpha_given = rc.applied().count("alpha_grid") > 0;
            const std::string& dir = s.args.out;
            if (&s == &ingest) cmd_ingest(rc, dir, out);
            else if (&s == &cluster) cmd_cluster(rc, dir, out);
            else if (&s == &scan) cmd_scan(rc, dir, out);
            else if (&s == &fitc) cmd_fit(rc, alpha_given, dir, out);
            else if (&s == &path) cmd_path(rc, alpha_given, dir, out);
            else if (&s == &cv) cmd_cv(rc, dir, out);
            else if (&s == &runc) cmd_run(rc, dir, out);
            else if (&s == &forecast) cmd_forecast(rc, s.args.model, dir, out);
            return 0;
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace dpr::cli
