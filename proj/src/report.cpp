#include "dpr/report.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dpr/errors.hpp"
#include "dpr/format.hpp"

namespace dpr {

namespace fs = std::filesystem;
using Eigen::Index;

namespace {

std::string optional_real(const std::optional<double>& v) { return v ? fmt_real(*v) : std::string{}; }

std::string json_real(double v) { return std::isfinite(v) ? fmt_real(v) : "null"; }
std::string json_real(const std::optional<double>& v) { return v ? json_real(*v) : "null"; }

std::string json_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

std::string label_text(int l) { return l == kNoise ? "noise" : std::to_string(l); }

template <class Fn>
std::string render(Fn&& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

}  // namespace

void write_cluster_table(std::ostream& out, const PanelDataset& rows, const ClusterModel& model) {
    if (model.labels.size() != rows.size()) throw InputError("cluster labels are not aligned with rows");
    TableWriter w(out);
    w.header({"entity", "period", "cluster", "core"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& o = rows.observations[i];
        w.cell(rows.entities[o.entity]).cell(rows.periods[o.period]).cell(label_text(model.labels[i]));
        w.cell(model.core.size() == rows.size() && model.core[i] ? 1 : 0);
        w.end_row();
    }
}

void write_scan_table(std::ostream& out, const std::vector<ScanRow>& rows) {
    TableWriter w(out);
    w.header({"eps", "min_pts", "k", "noise", "sc", "sse"});
    for (const auto& r : rows) {
        w.cell(r.eps).cell(r.min_pts).cell(r.k).cell(r.noise);
        w.cell(r.sc ? fmt_real(*r.sc) : std::string("undefined"));
        w.cell(r.sse);
        w.end_row();
    }
}

void write_k_distance(std::ostream& out, const std::vector<double>& profile) {
    TableWriter w(out);
    w.header({"rank", "k_distance"});
    for (std::size_t i = 0; i < profile.size(); ++i) {
        w.cell(i + 1).cell(profile[i]);
        w.end_row();
    }
}

void write_cv_table(std::ostream& out, const CvResult& cv) {
    TableWriter w(out);
    std::vector<std::string> cols{"lambda", "alpha", "mean_mse", "mean_r2", "selected", "status"};
    const std::size_t folds = [&] {
        std::size_t f = 0;
        for (const auto& c : cv.table) f = std::max(f, c.fold_mse.size());
        return f;
    }();
    for (std::size_t f = 0; f < folds; ++f) cols.push_back("fold" + std::to_string(f + 1) + "_mse");
    w.header(cols);
    for (std::size_t i = 0; i < cv.table.size(); ++i) {
        const auto& c = cv.table[i];
        w.cell(c.lambda).cell(c.alpha).cell(c.mean_mse).cell(c.mean_r2).cell(i == cv.best_index ? 1 : 0);
        w.cell(c.failed ? std::string("failed") : std::string("ok"));
        for (std::size_t f = 0; f < folds; ++f) {
            if (f < c.fold_mse.size())
                w.cell(c.fold_mse[f]);
            else
                w.cell(std::string_view{});
        }
        w.end_row();
    }
}

void write_coefficients(std::ostream& out, const FittedModel& m) {
    TableWriter w(out);
    w.header({"term", "coefficient", "source_coefficient", "mean", "std", "pinned_zero"});
    w.cell("(intercept)").cell(m.intercept).cell(m.source_intercept).cell(std::string_view{}).cell(
        std::string_view{});
    w.cell(0);
    w.end_row();
    for (Index j = 0; j < m.width(); ++j) {
        w.cell(m.column_names[static_cast<std::size_t>(j)]).cell(m.coefficients(j)).cell(m.source_coefficients(j));
        w.cell(m.column_means(j)).cell(m.column_stds(j)).cell(m.pinned_zero[static_cast<std::size_t>(j)] ? 1 : 0);
        w.end_row();
    }
}

void write_standardization(std::ostream& out, const DesignMatrix& dm) {
    TableWriter w(out);
    w.header({"column", "mean", "std", "constant"});
    for (Index j = 0; j < dm.cols(); ++j) {
        w.cell(dm.column_names[static_cast<std::size_t>(j)]).cell(dm.column_means(j)).cell(dm.column_stds(j));
        w.cell(dm.constant[static_cast<std::size_t>(j)] ? 1 : 0);
        w.end_row();
    }
}

void write_path_trajectories(std::ostream& out, const std::vector<double>& lambdas,
                             const std::vector<FittedModel>& path) {
    if (lambdas.size() != path.size()) throw InputError("path and lambda grid differ in length");
    TableWriter w(out);
    std::vector<std::string> cols{"lambda"};
    if (!path.empty()) cols.insert(cols.end(), path.front().column_names.begin(), path.front().column_names.end());
    w.header(cols);
    for (std::size_t i = 0; i < path.size(); ++i) {
        w.cell(lambdas[i]);
        for (Index j = 0; j < path[i].width(); ++j) w.cell(path[i].coefficients(j));
        w.end_row();
    }
}

void write_fitted(std::ostream& out, const std::vector<FittedRow>& rows) {
    TableWriter w(out);
    w.header({"entity", "period", "cluster", "actual", "fitted", "residual"});
    for (const auto& r : rows) {
        w.cell(r.entity).cell(r.period).cell(label_text(r.cluster)).cell(r.actual).cell(r.fitted).cell(r.residual);
        w.end_row();
    }
}

void write_forecast(std::ostream& out, const std::vector<ForecastRow>& rows) {
    TableWriter w(out);
    w.header({"period", "entity", "cluster", "predicted_log", "actual_log", "predicted", "actual", "relative_error"});
    for (const auto& r : rows) {
        w.cell(r.period).cell(r.entity).cell(label_text(r.cluster)).cell(r.predicted_log);
        w.cell(optional_real(r.actual_log)).cell(r.predicted_source).cell(optional_real(r.actual_source));
        w.cell(optional_real(r.relative_error));
        w.end_row();
    }
}

void write_forecast_summary(std::ostream& out, const ForecastSummary& s) {
    TableWriter w(out);
    w.header({"statistic", "value"});
    w.cell("scored").cell(s.n_scored).end_row();
    w.cell("mean_error").cell(s.mean_error).end_row();
    w.cell("error_variance").cell(s.error_variance).end_row();
    w.cell("mse").cell(optional_real(s.mse)).end_row();
    w.cell("r2").cell(optional_real(s.r2)).end_row();
    w.cell("mean_relative_error").cell(optional_real(s.mean_relative_error)).end_row();
}

void write_fit_scatter(std::ostream& out, const RunReport& report) {
    TableWriter w(out);
    w.header({"split", "entity", "period", "actual", "predicted"});
    for (const auto& r : report.fitted) {
        w.cell("train").cell(r.entity).cell(r.period).cell(r.actual).cell(r.fitted);
        w.end_row();
    }
    for (const auto& r : report.forecast) {
        if (!r.actual_log) continue;
        w.cell("test").cell(r.entity).cell(r.period).cell(*r.actual_log).cell(r.predicted_log);
        w.end_row();
    }
}

void write_summary_json(std::ostream& out, const RunReport& rep) {
    const auto& art = rep.train;
    const auto metrics = [](const StageMetrics& m) {
        return "{\"n\": " + std::to_string(m.n) + ", \"r2\": " + json_real(m.r2) + ", \"mse\": " + json_real(m.mse) +
               ", \"sparsity\": " + json_real(m.sparsity) + "}";
    };
    const auto& c = rep.config;
    out << "{\n";
    out << "  \"penalty_kind\": " << json_string(to_string(c.penalty_kind)) << ",\n";
    out << "  \"lambda\": " << json_real(art.model.penalty.lambda) << ",\n";
    out << "  \"alpha\": " << json_real(art.model.penalty.l1_ratio()) << ",\n";
    out << "  \"log_offset\": " << json_real(c.transform.log_offset) << ",\n";
    out << "  \"normalize_mode\": " << json_string(to_string(c.transform.normalize_mode)) << ",\n";
    out << "  \"outlier_policy\": " << json_string(to_string(c.outlier_policy)) << ",\n";
    out << "  \"fold_mode\": " << json_string(to_string(c.fold_mode)) << ",\n";
    out << "  \"cv_folds\": " << c.cv_folds << ",\n";
    out << "  \"train_periods\": " << rep.split.train_periods.size() << ",\n";
    out << "  \"test_periods\": " << rep.split.test_periods.size() << ",\n";
    out << "  \"clusters\": {\"use_clusters\": " << (c.use_clusters ? "true" : "false")
        << ", \"eps\": " << json_real(art.clusters.params.eps) << ", \"min_pts\": " << art.clusters.params.min_pts
        << ", \"core_strict\": " << (art.clusters.params.core_strict ? "true" : "false") << ", \"k\": " << art.clusters.k
        << ", \"noise\": " << art.clusters.noise_count() << ", \"sc\": " << json_real(art.clusters.sc)
        << ", \"sse\": " << json_real(art.clusters.sse) << ", \"baseline\": " << art.augmented.layout.baseline
        << ", \"dummy_columns\": " << art.augmented.layout.width()
        << ", \"excluded_rows\": " << art.augmented.dropped_rows.size()
        << ", \"test_assignment\": \"nearest training core point within eps\"}";
    if (rep.full_clusters)
        out << ",\n  \"full_data_clusters\": {\"k\": " << rep.full_clusters->k
            << ", \"noise\": " << rep.full_clusters->noise_count() << ", \"sc\": " << json_real(rep.full_clusters->sc)
            << ", \"sse\": " << json_real(rep.full_clusters->sse) << "}";
    out << ",\n";
    out << "  \"converged\": " << (art.model.diagnostics.converged ? "true" : "false") << ",\n";
    out << "  \"iterations\": " << art.model.diagnostics.iterations << ",\n";
    out << "  \"train\": " << metrics(rep.train_metrics) << ",\n";
    out << "  \"cv\": " << metrics(rep.cv_metrics) << ",\n";
    out << "  \"validation\": " << (rep.validation_metrics ? metrics(*rep.validation_metrics) : "null") << ",\n";
    out << "  \"test\": " << (rep.test_metrics ? metrics(*rep.test_metrics) : "null") << ",\n";
    const auto& s = rep.forecast_summary;
    out << "  \"forecast\": {\"rows\": " << rep.forecast.size() << ", \"scored\": " << s.n_scored
        << ", \"mean_error\": " << json_real(s.mean_error) << ", \"error_variance\": " << json_real(s.error_variance)
        << ", \"mean_relative_error\": " << json_real(s.mean_relative_error) << "}\n";
    out << "}\n";
}

// Text record:
//   dpr-pipeline 1
//   <key> <value>                   scalar fields
//   features <n>\t<name>...
//   entity_max <m>                  followed by m lines: entity\tmax...
//   cores <c>                       followed by c lines: label\tcoord...
//   noise_rows <r>\t<row>...
//   model                           followed by the save_model record
void save_pipeline_model(std::ostream& out, const PipelineModel& pm) {
    out << "dpr-pipeline 1\n";
    out << "log_offset " << fmt_real(pm.transform.log_offset) << '\n';
    out << "normalize_mode " << to_string(pm.transform.normalize_mode) << '\n';
    out << "use_clusters " << (pm.use_clusters ? 1 : 0) << '\n';
    out << "eps " << fmt_real(pm.dbscan.eps) << '\n';
    out << "min_pts " << pm.dbscan.min_pts << '\n';
    out << "core_strict " << (pm.dbscan.core_strict ? 1 : 0) << '\n';
    out << "k " << pm.layout.k << '\n';
    out << "baseline " << pm.layout.baseline << '\n';
    out << "features " << pm.feature_names.size();
    for (const auto& f : pm.feature_names) out << '\t' << f;
    out << '\n';
    out << "noise_rows " << pm.layout.noise_rows.size();
    for (auto r : pm.layout.noise_rows) out << '\t' << r;
    out << '\n';
    out << "entity_max " << pm.entity_max.size() << '\n';
    for (const auto& [e, v] : pm.entity_max) {
        out << e;
        for (double x : v) out << '\t' << fmt_real(x);
        out << '\n';
    }
    out << "cores " << pm.core_points.rows() << '\n';
    for (Index i = 0; i < pm.core_points.rows(); ++i) {
        out << pm.core_labels[static_cast<std::size_t>(i)];
        for (Index j = 0; j < pm.core_points.cols(); ++j) out << '\t' << fmt_real(pm.core_points(i, j));
        out << '\n';
    }
    out << "model\n";
    save_model(out, pm.model);
}

PipelineModel load_pipeline_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "dpr-pipeline 1") throw InputError("not a pipeline model record");
    PipelineModel pm;
    const auto real = [](std::string_view s) {
        double v;
        if (!parse_real(s, v)) throw InputError("pipeline model: bad number '" + std::string(s) + "'");
        return v;
    };
    const auto integer = [&](std::string_view s) { return static_cast<long long>(real(s)); };
    bool have_model = false;
    while (std::getline(in, line)) {
        const auto sp = line.find_first_of(" \t");
        const std::string key = line.substr(0, sp);
        const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
        const auto cells = split_line(rest, '\t');
        if (key == "log_offset") pm.transform.log_offset = real(rest);
        else if (key == "normalize_mode") pm.transform.normalize_mode = parse_normalize_mode(std::string(trim(rest)));
        else if (key == "use_clusters") pm.use_clusters = trim(rest) == "1";
        else if (key == "eps") pm.dbscan.eps = real(rest);
        else if (key == "min_pts") pm.dbscan.min_pts = static_cast<int>(integer(rest));
        else if (key == "core_strict") pm.dbscan.core_strict = trim(rest) == "1";
        else if (key == "k") pm.layout.k = static_cast<int>(integer(rest));
        else if (key == "baseline") pm.layout.baseline = static_cast<int>(integer(rest));
        else if (key == "features") {
            pm.feature_names.assign(cells.begin() + 1, cells.end());
        } else if (key == "noise_rows") {
            for (std::size_t i = 1; i < cells.size(); ++i) pm.layout.noise_rows.push_back(integer(cells[i]));
        } else if (key == "entity_max") {
            const auto m = integer(rest);
            for (long long i = 0; i < m; ++i) {
                if (!std::getline(in, line)) throw InputError("pipeline model: truncated entity table");
                const auto c = split_line(line, '\t');
                auto& v = pm.entity_max[c.at(0)];
                for (std::size_t j = 1; j < c.size(); ++j) v.push_back(real(c[j]));
            }
        } else if (key == "cores") {
            const auto c_count = integer(rest);
            std::vector<std::vector<double>> rows;
            for (long long i = 0; i < c_count; ++i) {
                if (!std::getline(in, line)) throw InputError("pipeline model: truncated core table");
                const auto c = split_line(line, '\t');
                pm.core_labels.push_back(static_cast<int>(integer(c.at(0))));
                rows.emplace_back();
                for (std::size_t j = 1; j < c.size(); ++j) rows.back().push_back(real(c[j]));
            }
            const Index d = rows.empty() ? static_cast<Index>(pm.feature_names.size())
                                         : static_cast<Index>(rows.front().size());
            pm.core_points.resize(static_cast<Index>(rows.size()), d);
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (Index j = 0; j < d; ++j) pm.core_points(static_cast<Index>(i), j) = rows[i].at(static_cast<std::size_t>(j));
        } else if (key == "model") {
            pm.model = load_model(in);
            have_model = true;
            break;
        } else if (!trim(line).empty()) {
            throw InputError("pipeline model: unknown key '" + key + "'");
        }
    }
    if (!have_model) throw InputError("pipeline model: missing model section");
    for (int c = 0; c < pm.layout.k; ++c)
        if (c != pm.layout.baseline) pm.layout.cluster_columns.push_back(c);
    return pm;
}

void write_directory_atomically(const std::string& dir,
                                const std::vector<std::pair<std::string, std::string>>& files) {
    const fs::path target(dir);
    fs::path staging = target;
    staging += ".tmp-" + std::to_string(::getpid());
    std::error_code ec;
    fs::remove_all(staging, ec);
    if (!fs::create_directories(staging, ec) || ec)
        throw InputError("cannot create output directory '" + staging.string() + "'");
    try {
        for (const auto& [name, text] : files) {
            std::ofstream out(staging / name, std::ios::binary);
            out << text;
            if (!out) throw InputError("cannot write '" + (staging / name).string() + "'");
        }
        if (fs::exists(target)) fs::remove_all(target);
        fs::rename(staging, target);
    } catch (const fs::filesystem_error& e) {
        fs::remove_all(staging, ec);
        throw InputError(std::string("cannot write output directory: ") + e.what());
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }
}

std::vector<std::pair<std::string, std::string>> render_plot_data(const RunReport& report) {
    const auto& art = report.train;
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("path_trajectories.csv",
                       render([&](std::ostream& os) { write_path_trajectories(os, art.path_lambdas, art.path); }));
    files.emplace_back("fit_scatter.csv", render([&](std::ostream& os) { write_fit_scatter(os, report); }));
    std::vector<double> kd;
    const Index n = art.cluster_points.rows();
    const int k = std::max(1, art.clusters.params.min_pts - 1);
    if (report.config.use_clusters && n > k) kd = k_distance_profile(art.cluster_points, k);
    files.emplace_back("k_distance.csv", render([&](std::ostream& os) { write_k_distance(os, kd); }));
    return files;
}

void emit_plot_data(const RunReport& report, const std::string& dir) {
    write_directory_atomically(dir, render_plot_data(report));
}

std::vector<std::pair<std::string, std::string>> render_training_artifacts(const TrainingArtifacts& art,
                                                                           const DprConfig& config) {
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("train_clusters.csv",
                       render([&](std::ostream& os) { write_cluster_table(os, art.train_log, art.clusters); }));
    files.emplace_back("standardization.csv", render([&](std::ostream& os) { write_standardization(os, art.design); }));
    files.emplace_back("cv_table.csv", render([&](std::ostream& os) { write_cv_table(os, art.cv); }));
    files.emplace_back("coefficients.csv", render([&](std::ostream& os) { write_coefficients(os, art.model); }));
    files.emplace_back("model.txt", render([&](std::ostream& os) {
                           save_pipeline_model(os, make_pipeline_model(art, config));
                       }));
    if (!art.scan.empty()) files.emplace_back("scan.csv", render([&](std::ostream& os) { write_scan_table(os, art.scan); }));
    return files;
}

std::vector<std::pair<std::string, std::string>> render_report(const RunReport& rep, const PanelDataset& data) {
    auto files = render_training_artifacts(rep.train, rep.config);

    // clusters.csv covers every observation: training rows with their
    // DBSCAN label, test rows with the label assigned from training cores.
    std::map<std::pair<std::string, std::string>, int> full_label;
    if (rep.full_clusters)
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& o = data.observations[i];
            full_label[{data.entities[o.entity], data.periods[o.period]}] = rep.full_clusters->labels[i];
        }
    files.emplace_back("clusters.csv", render([&](std::ostream& os) {
                           TableWriter w(os);
                           std::vector<std::string> cols{"entity", "period", "split", "cluster", "core"};
                           if (rep.full_clusters) cols.push_back("full_data_cluster");
                           w.header(cols);
                           const auto& art = rep.train;
                           for (std::size_t i = 0; i < art.train_log.size(); ++i) {
                               const auto& o = art.train_log.observations[i];
                               const auto& e = art.train_log.entities[o.entity];
                               const auto& p = art.train_log.periods[o.period];
                               w.cell(e).cell(p).cell("train").cell(label_text(art.clusters.labels[i]));
                               w.cell(art.clusters.core[i] ? 1 : 0);
                               if (rep.full_clusters) w.cell(label_text(full_label.at({e, p})));
                               w.end_row();
                           }
                           for (const auto& r : rep.forecast) {
                               w.cell(r.entity).cell(r.period).cell("test").cell(label_text(r.cluster)).cell(0);
                               if (rep.full_clusters) w.cell(label_text(full_label.at({r.entity, r.period})));
                               w.end_row();
                           }
                       }));
    files.emplace_back("fitted.csv", render([&](std::ostream& os) { write_fitted(os, rep.fitted); }));
    files.emplace_back("forecast.csv", render([&](std::ostream& os) { write_forecast(os, rep.forecast); }));
    files.emplace_back("summary.json", render([&](std::ostream& os) { write_summary_json(os, rep); }));
    for (auto& f : render_plot_data(rep)) files.push_back(std::move(f));
    return files;
}

void write_report(const RunReport& report, const PanelDataset& data, const std::string& dir) {
    write_directory_atomically(dir, render_report(report, data));
}

}  // namespace dpr
