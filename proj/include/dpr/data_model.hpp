#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dpr {

struct Observation {
    std::size_t entity = 0;  // index into PanelDataset::entities
    std::size_t period = 0;  // index into PanelDataset::periods
    std::vector<double> features;
    std::optional<double> target;
};

/// Long-format panel: one observation per (entity, period).
///
/// `periods` is kept in chronological order. Observations are kept sorted by
/// (entity name, period order), so two datasets holding the same records
/// compare equal regardless of input row order.
struct PanelDataset {
    std::vector<std::string> entities;
    std::vector<std::string> periods;
    std::vector<std::string> feature_names;
    std::vector<Observation> observations;

    std::size_t size() const { return observations.size(); }
    std::size_t n_features() const { return feature_names.size(); }

    /// Row-major feature matrix, one row per observation.
    Eigen::MatrixXd feature_matrix() const;
    /// Targets as a vector; throws InputError if any row lacks a target.
    Eigen::VectorXd target_vector() const;
    bool all_targets_present() const;

    /// Throws InputError if any invariant is broken.
    void validate() const;
    /// Re-sorts observations into canonical order and drops entities/periods
    /// with no remaining rows. Call after filtering observations.
    void normalize();
};

/// Column mapping for `load_panel`. Empty `features` means "every column not
/// named as entity, period or target".
struct PanelSchema {
    std::string entity_col = "entity";
    std::string period_col = "period";
    std::string target_col = "target";  // may be absent from the file
    std::vector<std::string> features;
    char delimiter = ',';
};

PanelDataset load_panel(std::istream& in, const PanelSchema& schema);
PanelDataset load_panel_file(const std::string& path, const PanelSchema& schema);
void write_panel(std::ostream& out, const PanelDataset& data, char delimiter = ',');

/// Mass of CO2 per unit of each energy feature.
struct EmissionFactorTable {
    std::map<std::string, double> factor_per_feature;
};

EmissionFactorTable load_factor_table(std::istream& in, char delimiter = ',');

/// target = sum_e features[e] * factor[e]. Features are left untouched.
PanelDataset compute_emissions(const PanelDataset& data, const EmissionFactorTable& factors);

enum class NormalizeMode { RawShares, PerFeatureMax, None };

struct TransformSpec {
    double log_offset = 1.0;
    NormalizeMode normalize_mode = NormalizeMode::RawShares;
};

/// x -> ln(x + offset) on every feature and target.
PanelDataset log_transform(const PanelDataset& data, const TransformSpec& spec);
double log_value(double source, const TransformSpec& spec);
double inverse_log_value(double logged, const TransformSpec& spec);
PanelDataset inverse_log_transform(const PanelDataset& data, const TransformSpec& spec);

struct MixFeatures {
    Eigen::MatrixXd values;         // rows aligned to observations
    std::vector<bool> zero_row;     // RawShares rows whose sum was 0
};

/// Clustering features describing each row's energy mix.
///
/// PerFeatureMax divides each column by the entity's maximum across its
/// periods. `entity_max` lets callers supply maxima computed elsewhere (e.g.
/// training rows only); entities absent from it fall back to their own rows.
MixFeatures energy_mix_features(const PanelDataset& data, NormalizeMode mode,
                                const std::map<std::string, std::vector<double>>* entity_max = nullptr);

std::map<std::string, std::vector<double>> entity_column_max(const PanelDataset& data);

NormalizeMode parse_normalize_mode(const std::string& s);
std::string to_string(NormalizeMode m);

}  // namespace dpr
