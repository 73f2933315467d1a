#include "dpr/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dpr/errors.hpp"
#include "dpr/format.hpp"

namespace dpr {

Eigen::MatrixXd PanelDataset::feature_matrix() const {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(n_features()));
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = 0; j < n_features(); ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = observations[i].features[j];
    return X;
}

bool PanelDataset::all_targets_present() const {
    return std::all_of(observations.begin(), observations.end(),
                       [](const Observation& o) { return o.target.has_value(); });
}

Eigen::VectorXd PanelDataset::target_vector() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) {
        const auto& o = observations[i];
        if (!o.target)
            throw InputError("observation (" + entities[o.entity] + ", " + periods[o.period] +
                             ") has no target");
        y(static_cast<Eigen::Index>(i)) = *o.target;
    }
    return y;
}

void PanelDataset::validate() const {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& o : observations) {
        if (o.entity >= entities.size() || o.period >= periods.size())
            throw InputError("observation references an unknown entity or period");
        if (o.features.size() != feature_names.size())
            throw InputError("observation (" + entities[o.entity] + ", " + periods[o.period] + ") has " +
                             std::to_string(o.features.size()) + " features, expected " +
                             std::to_string(feature_names.size()));
        if (!seen.emplace(o.entity, o.period).second)
            throw InputError("duplicate observation (" + entities[o.entity] + ", " + periods[o.period] + ")");
    }
    std::set<std::string> names(periods.begin(), periods.end());
    if (names.size() != periods.size()) throw InputError("duplicate period label");
}

void PanelDataset::normalize() {
    std::vector<bool> used_e(entities.size()), used_p(periods.size());
    for (const auto& o : observations) {
        used_e[o.entity] = true;
        used_p[o.period] = true;
    }
    // entity order is by name so that the canonical row order does not
    // depend on how the dataset was assembled
    std::vector<std::size_t> e_order;
    for (std::size_t e = 0; e < entities.size(); ++e)
        if (used_e[e]) e_order.push_back(e);
    std::sort(e_order.begin(), e_order.end(),
              [&](std::size_t a, std::size_t b) { return entities[a] < entities[b]; });
    std::vector<std::size_t> e_map(entities.size()), p_map(periods.size());
    std::vector<std::string> new_e, new_p;
    for (auto e : e_order) {
        e_map[e] = new_e.size();
        new_e.push_back(entities[e]);
    }
    for (std::size_t p = 0; p < periods.size(); ++p)
        if (used_p[p]) {
            p_map[p] = new_p.size();
            new_p.push_back(periods[p]);
        }
    for (auto& o : observations) {
        o.entity = e_map[o.entity];
        o.period = p_map[o.period];
    }
    entities = std::move(new_e);
    periods = std::move(new_p);
    std::stable_sort(observations.begin(), observations.end(), [](const Observation& a, const Observation& b) {
        return a.entity != b.entity ? a.entity < b.entity : a.period < b.period;
    });
}

namespace {

std::string location(std::size_t line, const std::string& column) {
    return "line " + std::to_string(line) + ", column '" + column + "'";
}

// Chronological order: numeric when every label parses as a number,
// lexicographic otherwise.
std::vector<std::string> order_periods(std::set<std::string> labels) {
    std::vector<std::string> out(labels.begin(), labels.end());
    bool numeric = true;
    for (const auto& s : out) {
        double v;
        if (!parse_real(s, v)) {
            numeric = false;
            break;
        }
    }
    if (numeric) {
        std::stable_sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
            double x = 0, y = 0;
            parse_real(a, x);
            parse_real(b, y);
            return x < y;
        });
        for (std::size_t i = 1; i < out.size(); ++i) {
            double a = 0, b = 0;
            parse_real(out[i - 1], a);
            parse_real(out[i], b);
            if (a == b) throw InputError("period labels '" + out[i - 1] + "' and '" + out[i] + "' are equal");
        }
    }
    return out;
}

}  // namespace

PanelDataset load_panel(std::istream& in, const PanelSchema& schema) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_line(line, schema.delimiter);
            break;
        }
    }
    if (header.empty()) throw InputError("input has no header row");

    const auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto require_col = [&](const std::string& name) {
        auto c = find_col(name);
        if (!c) throw InputError("missing required column '" + name + "'");
        return *c;
    };

    const std::size_t entity_c = require_col(schema.entity_col);
    const std::size_t period_c = require_col(schema.period_col);
    const auto target_c = find_col(schema.target_col);

    PanelDataset data;
    std::vector<std::size_t> feature_c;
    if (schema.features.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c == entity_c || c == period_c || (target_c && c == *target_c)) continue;
            feature_c.push_back(c);
            data.feature_names.push_back(header[c]);
        }
    } else {
        for (const auto& f : schema.features) {
            feature_c.push_back(require_col(f));
            data.feature_names.push_back(f);
        }
    }
    if (feature_c.empty()) throw InputError("schema selects no feature columns");

    struct RawRow {
        std::string entity, period;
        std::vector<double> features;
        std::optional<double> target;
        std::size_t line;
    };
    std::vector<RawRow> rows;
    std::set<std::string> entity_set, period_set;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_line(line, schema.delimiter);
        if (cells.size() != header.size())
            throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " cells, found " + std::to_string(cells.size()));
        RawRow r;
        r.line = line_no;
        r.entity = cells[entity_c];
        r.period = cells[period_c];
        if (r.entity.empty()) throw InputError(location(line_no, schema.entity_col) + ": empty entity id");
        if (r.period.empty()) throw InputError(location(line_no, schema.period_col) + ": empty period label");
        for (std::size_t k = 0; k < feature_c.size(); ++k) {
            const auto& cell = cells[feature_c[k]];
            double v;
            if (!parse_real(cell, v) || !std::isfinite(v))
                throw InputError(location(line_no, header[feature_c[k]]) + ": non-numeric value '" + cell + "'");
            if (v < 0)
                throw InputError(location(line_no, header[feature_c[k]]) + ": negative value '" + cell + "'");
            r.features.push_back(v);
        }
        if (target_c && !cells[*target_c].empty()) {
            double v;
            const auto& cell = cells[*target_c];
            if (!parse_real(cell, v) || !std::isfinite(v))
                throw InputError(location(line_no, schema.target_col) + ": non-numeric value '" + cell + "'");
            if (v < 0) throw InputError(location(line_no, schema.target_col) + ": negative value '" + cell + "'");
            r.target = v;
        }
        entity_set.insert(r.entity);
        period_set.insert(r.period);
        rows.push_back(std::move(r));
    }

    data.entities.assign(entity_set.begin(), entity_set.end());
    data.periods = order_periods(std::move(period_set));

    std::map<std::pair<std::string, std::string>, std::size_t> seen;
    for (auto& r : rows) {
        auto [it, fresh] = seen.emplace(std::make_pair(r.entity, r.period), r.line);
        if (!fresh)
            throw InputError("duplicate observation (" + r.entity + ", " + r.period + ") on lines " +
                             std::to_string(it->second) + " and " + std::to_string(r.line));
        Observation o;
        o.entity = static_cast<std::size_t>(
            std::lower_bound(data.entities.begin(), data.entities.end(), r.entity) - data.entities.begin());
        o.period = static_cast<std::size_t>(std::find(data.periods.begin(), data.periods.end(), r.period) -
                                            data.periods.begin());
        o.features = std::move(r.features);
        o.target = r.target;
        data.observations.push_back(std::move(o));
    }
    data.normalize();
    data.validate();
    return data;
}

PanelDataset load_panel_file(const std::string& path, const PanelSchema& schema) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open input file '" + path + "'");
    return load_panel(in, schema);
}

void write_panel(std::ostream& out, const PanelDataset& data, char delimiter) {
    TableWriter w(out, delimiter);
    std::vector<std::string> cols{"entity", "period"};
    cols.insert(cols.end(), data.feature_names.begin(), data.feature_names.end());
    cols.push_back("target");
    w.header(cols);
    for (const auto& o : data.observations) {
        w.cell(data.entities[o.entity]).cell(data.periods[o.period]);
        for (double v : o.features) w.cell(v);
        if (o.target)
            w.cell(*o.target);
        else
            w.cell(std::string_view{});
        w.end_row();
    }
}

EmissionFactorTable load_factor_table(std::istream& in, char delimiter) {
    EmissionFactorTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty() || trim(line).front() == '#') continue;
        auto cells = split_line(line, delimiter);
        if (cells.size() != 2)
            throw InputError("factor table line " + std::to_string(line_no) + ": expected 2 cells");
        double v;
        if (!parse_real(cells[1], v)) {
            if (line_no == 1) continue;  // header
            throw InputError("factor table line " + std::to_string(line_no) + ": non-numeric factor '" +
                             cells[1] + "'");
        }
        if (v < 0 || !std::isfinite(v))
            throw InputError("factor table line " + std::to_string(line_no) + ": factor must be finite and >= 0");
        t.factor_per_feature[cells[0]] = v;
    }
    return t;
}

PanelDataset compute_emissions(const PanelDataset& data, const EmissionFactorTable& factors) {
    std::vector<double> f;
    for (const auto& name : data.feature_names) {
        auto it = factors.factor_per_feature.find(name);
        if (it == factors.factor_per_feature.end())
            throw InputError("no emission factor for feature '" + name + "'");
        f.push_back(it->second);
    }
    PanelDataset out = data;
    for (auto& o : out.observations) {
        double total = 0.0;
        for (std::size_t e = 0; e < f.size(); ++e) total += o.features[e] * f[e];
        o.target = total;
    }
    return out;
}

double log_value(double source, const TransformSpec& spec) {
    const double shifted = source + spec.log_offset;
    if (!(shifted > 0) || !std::isfinite(shifted))
        throw InputError("cannot log-transform " + fmt_real(source) + " with offset " + fmt_real(spec.log_offset));
    return std::log(shifted);
}

double inverse_log_value(double logged, const TransformSpec& spec) { return std::exp(logged) - spec.log_offset; }

PanelDataset log_transform(const PanelDataset& data, const TransformSpec& spec) {
    PanelDataset out = data;
    for (auto& o : out.observations) {
        for (auto& v : o.features) v = log_value(v, spec);
        if (o.target) o.target = log_value(*o.target, spec);
    }
    return out;
}

PanelDataset inverse_log_transform(const PanelDataset& data, const TransformSpec& spec) {
    PanelDataset out = data;
    for (auto& o : out.observations) {
        for (auto& v : o.features) v = inverse_log_value(v, spec);
        if (o.target) o.target = inverse_log_value(*o.target, spec);
    }
    return out;
}

std::map<std::string, std::vector<double>> entity_column_max(const PanelDataset& data) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& o : data.observations) {
        auto& m = out.try_emplace(data.entities[o.entity], data.n_features(), 0.0).first->second;
        for (std::size_t j = 0; j < o.features.size(); ++j) m[j] = std::max(m[j], o.features[j]);
    }
    return out;
}

MixFeatures energy_mix_features(const PanelDataset& data, NormalizeMode mode,
                                const std::map<std::string, std::vector<double>>* entity_max) {
    MixFeatures mix;
    mix.values = data.feature_matrix();
    mix.zero_row.assign(data.size(), false);
    switch (mode) {
        case NormalizeMode::None:
            break;
        case NormalizeMode::RawShares:
            for (Eigen::Index i = 0; i < mix.values.rows(); ++i) {
                const double s = mix.values.row(i).sum();
                if (s > 0) {
                    mix.values.row(i) /= s;
                } else {
                    mix.values.row(i).setZero();
                    mix.zero_row[static_cast<std::size_t>(i)] = true;
                }
            }
            break;
        case NormalizeMode::PerFeatureMax: {
            const auto own = entity_column_max(data);
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto& name = data.entities[data.observations[i].entity];
                const std::vector<double>* m = nullptr;
                if (entity_max) {
                    auto it = entity_max->find(name);
                    if (it != entity_max->end()) m = &it->second;
                }
                if (!m) m = &own.at(name);
                for (std::size_t j = 0; j < data.n_features(); ++j) {
                    auto& v = mix.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    v = (*m)[j] > 0 ? v / (*m)[j] : 0.0;
                }
            }
            break;
        }
    }
    return mix;
}

NormalizeMode parse_normalize_mode(const std::string& s) {
    if (s == "raw_shares" || s == "RawShares") return NormalizeMode::RawShares;
    if (s == "per_feature_max" || s == "PerFeatureMax") return NormalizeMode::PerFeatureMax;
    if (s == "none" || s == "None") return NormalizeMode::None;
    throw InputError("unknown normalize mode '" + s + "'");
}

std::string to_string(NormalizeMode m) {
    switch (m) {
        case NormalizeMode::RawShares: return "raw_shares";
        case NormalizeMode::PerFeatureMax: return "per_feature_max";
        case NormalizeMode::None: return "none";
    }
    return "?";
}

}  // namespace dpr
