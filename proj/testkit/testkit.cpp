#include "testkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "dpr/errors.hpp"
#include "dpr/format.hpp"

namespace dpr::testkit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string padded(const char* prefix, int i, int width) {
    std::string digits_text = std::to_string(i);
    if (static_cast<int>(digits_text.size()) < width)
        digits_text.insert(0, static_cast<std::size_t>(width) - digits_text.size(), '0');
    return prefix + digits_text;
}

int digits(int n) { return n < 10 ? 1 : 1 + digits(n / 10); }

}  // namespace

void SyntheticSpec::validate() const {
    if (n_entities < 1 || n_periods < 1 || n_features < 1 || n_clusters < 1)
        throw InputError("synthetic spec: sizes must be positive");
    if (static_cast<int>(mix_profiles.size()) != n_clusters)
        throw InputError("synthetic spec: need one mix profile per cluster");
    for (const auto& row : mix_profiles) {
        if (static_cast<int>(row.size()) != n_features) throw InputError("synthetic spec: profile width mismatch");
        double s = 0.0;
        for (double v : row) {
            if (!(v >= 0)) throw InputError("synthetic spec: negative share");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) throw InputError("synthetic spec: profile rows must sum to 1");
    }
    if (static_cast<int>(true_coefficients.size()) != n_features)
        throw InputError("synthetic spec: need one coefficient per feature");
    if (!cluster_offsets.empty() && static_cast<int>(cluster_offsets.size()) != n_clusters)
        throw InputError("synthetic spec: need one offset per cluster");
    if (!copy_of.empty()) {
        if (static_cast<int>(copy_of.size()) != n_features) throw InputError("synthetic spec: copy_of width mismatch");
        for (int j = 0; j < n_features; ++j) {
            const int src = copy_of[static_cast<std::size_t>(j)];
            if (src < 0) continue;
            if (src >= n_features || copy_of[static_cast<std::size_t>(src)] >= 0)
                throw InputError("synthetic spec: a copy must point at a base column");
            for (const auto& row : mix_profiles)
                if (row[static_cast<std::size_t>(j)] != 0.0)
                    throw InputError("synthetic spec: copy columns need a zero profile share");
        }
    }
    if (noise_sd < 0 || copy_drift_sd < 0 || mix_jitter < 0 || cell_sd < 0 || scale_log_sd < 0 || growth_sd < 0)
        throw InputError("synthetic spec: spreads must be >= 0");
}

SyntheticPanel generate_panel(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> z(0.0, 1.0);

    SyntheticPanel out;
    auto& d = out.data;
    const int ew = std::max(2, digits(spec.n_entities));
    for (int e = 0; e < spec.n_entities; ++e) d.entities.push_back(padded("E", e + 1, ew));
    for (int t = 0; t < spec.n_periods; ++t) d.periods.push_back(std::to_string(spec.first_period + t));
    const int fw = std::max(2, digits(spec.n_features));
    for (int j = 0; j < spec.n_features; ++j) d.feature_names.push_back(padded("f", j + 1, fw));

    out.coefficients = Eigen::Map<const VectorXd>(spec.true_coefficients.data(), spec.n_features);
    out.offsets = spec.cluster_offsets.empty() ? std::vector<double>(static_cast<std::size_t>(spec.n_clusters), 0.0)
                                               : spec.cluster_offsets;

    for (int e = 0; e < spec.n_entities; ++e) {
        const int c = e % spec.n_clusters;
        out.entity_cluster.push_back(c);
        std::vector<double> mix = spec.mix_profiles[static_cast<std::size_t>(c)];
        double total = 0.0;
        for (double& m : mix) {
            m = std::max(1e-4, m + spec.mix_jitter * z(rng));
            total += m;
        }
        for (double& m : mix) m /= total;
        const double scale = std::exp(spec.scale_log_mean + spec.scale_log_sd * z(rng));
        const double growth = spec.growth + spec.growth_sd * z(rng);
        for (int t = 0; t < spec.n_periods; ++t) {
            Observation o;
            o.entity = static_cast<std::size_t>(e);
            o.period = static_cast<std::size_t>(t);
            double y = spec.intercept + out.offsets[static_cast<std::size_t>(c)];
            for (int j = 0; j < spec.n_features; ++j) {
                const int src = spec.copy_of.empty() ? -1 : spec.copy_of[static_cast<std::size_t>(j)];
                double x;
                if (src < 0) {
                    x = scale * std::exp(growth * t) * mix[static_cast<std::size_t>(j)] * std::exp(spec.cell_sd * z(rng));
                } else {
                    x = o.features[static_cast<std::size_t>(src)];
                    if (t >= spec.copy_split_period) x *= std::exp(spec.copy_drift_sd * z(rng));
                }
                o.features.push_back(x);
                y += spec.true_coefficients[static_cast<std::size_t>(j)] * std::log(x + 1.0);
            }
            y += spec.noise_sd * z(rng);
            o.target = std::exp(y) - 1.0;
            d.observations.push_back(std::move(o));
            out.labels.push_back(c);
        }
    }
    d.validate();
    return out;
}

std::vector<std::vector<double>> dominant_profiles(int n_clusters, int n_features, double h) {
    std::vector<std::vector<double>> p(static_cast<std::size_t>(n_clusters),
                                       std::vector<double>(static_cast<std::size_t>(n_features), (1.0 - h) / n_features));
    for (int c = 0; c < n_clusters; ++c) p[static_cast<std::size_t>(c)][static_cast<std::size_t>(c % n_features)] += h;
    return p;
}

SyntheticSpec six_cluster_spec(std::uint64_t seed, double separation) {
    SyntheticSpec s;
    s.n_entities = 30;
    s.n_periods = 10;
    s.n_features = 6;
    s.n_clusters = 6;
    const double h = 0.5;
    s.mix_profiles = dominant_profiles(6, 6, h);
    // Rows scatter around their profile through the multiplicative cell
    // noise. To first order a share vector s moves by
    //   E|ds|^2 = sd^2 (sum s^2 - 2 sum s^3 + (sum s^2)^2),
    // which fixes the cell sd for the requested centre-distance ratio.
    const auto& p = s.mix_profiles.front();
    double s2 = 0.0, s3 = 0.0;
    for (double v : p) {
        s2 += v * v;
        s3 += v * v * v;
    }
    const double rms_per_sd = std::sqrt(s2 - 2.0 * s3 + s2 * s2);
    s.cell_sd = (h * std::sqrt(2.0) / separation) / rms_per_sd;
    s.mix_jitter = 0.0;
    s.true_coefficients = {0.8, 0.0, 0.5, 0.0, -0.3, 0.2};
    s.cluster_offsets = {0.0, 0.4, -0.3, 0.7, -0.6, 0.2};
    s.intercept = 1.0;
    s.noise_sd = 0.005;
    s.scale_log_sd = 1.2;
    s.seed = seed;
    return s;
}

SyntheticSpec collinear_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.n_entities = 46;
    s.n_periods = 20;
    s.n_features = 16;
    s.n_clusters = 16;
    constexpr int kBase = 7;
    s.copy_of = {-1, -1, -1, -1, -1, -1, -1, 0, 0, 1, 1, 2, 3, 4, 5, 6};
    s.copy_split_period = 12;
    s.copy_drift_sd = 0.05;
    // Each cluster raises a distinct pair of base shares.
    const double h = 0.6;
    int c = 0;
    for (int a = 0; a < kBase && c < s.n_clusters; ++a)
        for (int b = a + 1; b < kBase && c < s.n_clusters; ++b, ++c) {
            std::vector<double> row(16, 0.0);
            for (int j = 0; j < kBase; ++j) row[static_cast<std::size_t>(j)] = (1.0 - h) / kBase;
            row[static_cast<std::size_t>(a)] += h / 2;
            row[static_cast<std::size_t>(b)] += h / 2;
            s.mix_profiles.push_back(row);
        }
    s.cell_sd = 0.05;
    s.scale_log_sd = 1.5;
    const double group_coef[kBase] = {0.9, -0.6, 0.5, 0.4, -0.3, 0.35, 0.25};
    std::vector<int> group_size(kBase, 1);
    for (int j = kBase; j < 16; ++j) ++group_size[static_cast<std::size_t>(s.copy_of[static_cast<std::size_t>(j)])];
    for (int j = 0; j < 16; ++j) {
        const int g = j < kBase ? j : s.copy_of[static_cast<std::size_t>(j)];
        s.true_coefficients.push_back(group_coef[g] / group_size[static_cast<std::size_t>(g)]);
    }
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int k = 0; k < s.n_clusters; ++k) s.cluster_offsets.push_back(k == 0 ? 0.0 : u(rng));
    s.intercept = 1.0;
    s.noise_sd = 0.01;
    s.seed = seed;
    return s;
}

namespace {

std::vector<double> parse_vector(const std::string& key, const std::string& text) {
    std::vector<double> v;
    for (const auto& cell : split_line(text, ',')) {
        double x;
        if (!parse_real(cell, x)) throw InputError("synthetic spec: bad number in " + key);
        v.push_back(x);
    }
    return v;
}

}  // namespace

SyntheticSpec parse_synthetic_spec(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw InputError("synthetic spec line " + std::to_string(line_no) + ": expected key = value");
        kv.emplace_back(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
    }
    const auto lookup = [&](const std::string& k) -> const std::string* {
        const std::string* hit = nullptr;
        for (const auto& [key, v] : kv)
            if (key == k) hit = &v;
        return hit;
    };
    const auto real = [](const std::string& key, const std::string& v) {
        double x;
        if (!parse_real(v, x)) throw InputError("synthetic spec: bad number for " + key);
        return x;
    };
    // without a seed key, presets keep their own default seed
    const auto* seed_text = lookup("seed");
    const auto seed = seed_text ? static_cast<std::uint64_t>(real("seed", *seed_text)) : std::uint64_t{1};

    SyntheticSpec s;
    s.seed = seed;
    if (const auto* p = lookup("preset")) {
        if (*p == "six_cluster") {
            const auto* sep = lookup("separation");
            const double separation = sep ? real("separation", *sep) : 5.0;
            s = seed_text ? six_cluster_spec(seed, separation) : six_cluster_spec(7, separation);
        } else if (*p == "collinear") {
            s = seed_text ? collinear_spec(seed) : collinear_spec();
        } else {
            throw InputError("synthetic spec: unknown preset '" + *p + "'");
        }
    }
    for (const auto& [key, v] : kv) {
        if (key == "preset" || key == "seed" || key == "separation") continue;
        if (key == "n_entities") s.n_entities = static_cast<int>(real(key, v));
        else if (key == "n_periods") s.n_periods = static_cast<int>(real(key, v));
        else if (key == "n_features") s.n_features = static_cast<int>(real(key, v));
        else if (key == "n_clusters") s.n_clusters = static_cast<int>(real(key, v));
        else if (key == "mix_profiles") {
            s.mix_profiles.clear();
            for (const auto& row : split_line(v, ';')) s.mix_profiles.push_back(parse_vector(key, row));
        } else if (key == "true_coefficients") s.true_coefficients = parse_vector(key, v);
        else if (key == "cluster_offsets") s.cluster_offsets = parse_vector(key, v);
        else if (key == "intercept") s.intercept = real(key, v);
        else if (key == "noise_sd") s.noise_sd = real(key, v);
        else if (key == "mix_jitter") s.mix_jitter = real(key, v);
        else if (key == "cell_sd") s.cell_sd = real(key, v);
        else if (key == "scale_log_mean") s.scale_log_mean = real(key, v);
        else if (key == "scale_log_sd") s.scale_log_sd = real(key, v);
        else if (key == "growth") s.growth = real(key, v);
        else if (key == "growth_sd") s.growth_sd = real(key, v);
        else if (key == "first_period") s.first_period = static_cast<int>(real(key, v));
        else if (key == "copy_of") {
            s.copy_of.clear();
            for (double x : parse_vector(key, v)) s.copy_of.push_back(static_cast<int>(x));
        } else if (key == "copy_split_period") s.copy_split_period = static_cast<int>(real(key, v));
        else if (key == "copy_drift_sd") s.copy_drift_sd = real(key, v);
        else throw InputError("synthetic spec: unknown key '" + key + "'");
    }
    if (s.mix_profiles.empty()) s.mix_profiles = dominant_profiles(s.n_clusters, s.n_features, 0.5);
    if (s.true_coefficients.empty()) s.true_coefficients.assign(static_cast<std::size_t>(s.n_features), 0.5);
    s.validate();
    return s;
}

SyntheticSpec parse_synthetic_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open synthetic spec '" + path + "'");
    return parse_synthetic_spec(in);
}

void dump_panel_csv(const std::string& path, const PanelDataset& data) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    write_panel(out, data);
}

// ---------------------------------------------------------------------------

namespace {

double dist(const MatrixXd& P, Index i, Index j) {
    double s = 0.0;
    for (Index c = 0; c < P.cols(); ++c) {
        const double d = P(i, c) - P(j, c);
        s += d * d;
    }
    return std::sqrt(s);
}

std::vector<int> relabel_by_first_occurrence(const std::vector<int>& raw) {
    std::map<int, int> ids;
    std::vector<int> out(raw.size(), kNoise);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == kNoise) continue;
        auto it = ids.find(raw[i]);
        if (it == ids.end()) it = ids.emplace(raw[i], static_cast<int>(ids.size())).first;
        out[i] = it->second;
    }
    return out;
}

}  // namespace

std::vector<int> brute_force_dbscan(const MatrixXd& P, const DbscanParams& params) {
    const auto n = static_cast<std::size_t>(P.rows());
    std::vector<std::vector<char>> near(n, std::vector<char>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            near[i][j] = dist(P, static_cast<Index>(i), static_cast<Index>(j)) <= params.eps;
    std::vector<char> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        int count = 0;
        for (std::size_t j = 0; j < n; ++j) count += near[i][j];
        core[i] = params.core_strict ? count > params.min_pts : count >= params.min_pts;
    }
    // reach[i][j]: j density-reachable from i through a chain of cores
    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) reach[i][j] = core[i] && core[j] && near[i][j];
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (reach[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (reach[k][j]) reach[i][j] = 1;
    std::vector<int> raw(n, kNoise);
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i]) continue;
        for (std::size_t j = 0; j <= i; ++j)
            if (reach[i][j]) {
                raw[i] = static_cast<int>(j);
                break;
            }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        for (std::size_t j = 0; j < n; ++j)
            if (core[j] && near[i][j]) {
                raw[i] = raw[j];
                break;
            }
    }
    return relabel_by_first_occurrence(raw);
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::map<int, int> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] == kNoise) != (b[i] == kNoise)) return false;
        if (a[i] == kNoise) continue;
        auto [ia, na] = ab.emplace(a[i], b[i]);
        auto [ib, nb] = ba.emplace(b[i], a[i]);
        if (ia->second != b[i] || ib->second != a[i]) return false;
    }
    return true;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw InputError("adjusted_rand_index: label vectors differ in length");
    const auto c2 = [](double m) { return m * (m - 1.0) / 2.0; };
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1;
        ra[a[i]] += 1;
        rb[b[i]] += 1;
    }
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [k, m] : table) index += c2(m);
    for (const auto& [k, m] : ra) sa += c2(m);
    for (const auto& [k, m] : rb) sb += c2(m);
    const double total = c2(static_cast<double>(a.size()));
    const double expected = total > 0 ? sa * sb / total : 0.0;
    const double max_index = 0.5 * (sa + sb);
    // both partitions all-singletons or both one block
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

double naive_silhouette(const MatrixXd& P, const std::vector<int>& labels) {
    const auto n = labels.size();
    std::map<int, int> size;
    for (int l : labels)
        if (l != kNoise) size[l] += 1;
    if (size.size() < 2) throw InputError("naive_silhouette: fewer than two clusters");
    double total = 0.0;
    int counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == kNoise) continue;
        ++counted;
        if (size[labels[i]] == 1) continue;
        std::map<int, double> sum;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && labels[j] != kNoise) sum[labels[j]] += dist(P, static_cast<Index>(i), static_cast<Index>(j));
        const double a = sum[labels[i]] / (size[labels[i]] - 1);
        double b = INFINITY;
        for (const auto& [l, s] : sum)
            if (l != labels[i]) b = std::min(b, s / size[l]);
        const double m = std::max(a, b);
        if (m > 0) total += (b - a) / m;
    }
    return total / counted;
}

double naive_sse(const MatrixXd& P, const std::vector<int>& labels) {
    std::map<int, std::vector<Index>> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kNoise) members[labels[i]].push_back(static_cast<Index>(i));
    double total = 0.0;
    for (const auto& [l, rows] : members) {
        for (Index c = 0; c < P.cols(); ++c) {
            double mean = 0.0;
            for (Index r : rows) mean += P(r, c);
            mean /= static_cast<double>(rows.size());
            for (Index r : rows) total += (P(r, c) - mean) * (P(r, c) - mean);
        }
    }
    return total;
}

std::vector<double> naive_k_distance(const MatrixXd& P, int k) {
    std::vector<double> out;
    for (Index i = 0; i < P.rows(); ++i) {
        std::vector<double> d;
        for (Index j = 0; j < P.rows(); ++j)
            if (j != i) d.push_back(dist(P, i, j));
        std::sort(d.begin(), d.end());
        out.push_back(d.at(static_cast<std::size_t>(k - 1)));
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

std::vector<Index> naive_region(const MatrixXd& P, Index i, double eps) {
    std::vector<Index> out;
    for (Index j = 0; j < P.rows(); ++j)
        if (dist(P, i, j) <= eps) out.push_back(j);
    return out;
}

// ---------------------------------------------------------------------------

double reference_objective(const MatrixXd& X, const VectorXd& y, double intercept, const VectorXd& beta,
                           double lambda, double alpha) {
    const auto n = X.rows();
    double rss = 0.0;
    for (Index i = 0; i < n; ++i) {
        double f = intercept;
        for (Index j = 0; j < X.cols(); ++j) f += X(i, j) * beta(j);
        rss += (y(i) - f) * (y(i) - f);
    }
    double l1 = 0.0, l2 = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        l1 += std::abs(beta(j));
        l2 += beta(j) * beta(j);
    }
    return rss / static_cast<double>(n) + lambda * (alpha * l1 + (1.0 - alpha) * l2);
}

ReferenceSolution reference_objective_min(const MatrixXd& X, const VectorXd& y, double lambda, double alpha) {
    const Index n = X.rows(), p = X.cols();
    if (p > 12) throw InputError("reference_objective_min: p must be <= 12");
    if (n < 1) throw InputError("reference_objective_min: no rows");
    const VectorXd xbar = X.colwise().mean().transpose();
    const double ybar = y.mean();
    const MatrixXd Xc = X.rowwise() - xbar.transpose();
    const VectorXd yc = y.array() - ybar;
    const double N = static_cast<double>(n);

    ReferenceSolution best;
    best.beta = VectorXd::Zero(p);
    best.intercept = ybar;
    best.objective = reference_objective(X, y, ybar, best.beta, lambda, alpha);

    if (alpha == 0.0) {
        // min |[Xc; sqrt(N lambda) I] b - [yc; 0]|^2
        MatrixXd A(n + p, p);
        A << Xc, std::sqrt(N * lambda) * MatrixXd::Identity(p, p);
        VectorXd rhs = VectorXd::Zero(n + p);
        rhs.head(n) = yc;
        Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
        if (qr.rank() < p) throw NumericalError("reference_objective_min: singular ridge system");
        best.beta = qr.solve(rhs);
        best.intercept = ybar - xbar.dot(best.beta);
        best.objective = reference_objective(X, y, best.intercept, best.beta, lambda, alpha);
        return best;
    }

    const MatrixXd G = Xc.transpose() * Xc * (2.0 / N);
    const VectorXd c = Xc.transpose() * yc * (2.0 / N);
    std::vector<int> sign(static_cast<std::size_t>(p), 0);
    long long patterns = 1;
    for (Index j = 0; j < p; ++j) patterns *= 3;
    for (long long code = 0; code < patterns; ++code) {
        long long rest = code;
        std::vector<Index> active;
        for (Index j = 0; j < p; ++j) {
            sign[static_cast<std::size_t>(j)] = static_cast<int>(rest % 3) - 1;
            rest /= 3;
            if (sign[static_cast<std::size_t>(j)] != 0) active.push_back(j);
        }
        const auto m = static_cast<Index>(active.size());
        if (m == 0) continue;
        MatrixXd H(m, m);
        VectorXd r(m);
        for (Index a = 0; a < m; ++a) {
            for (Index b = 0; b < m; ++b) H(a, b) = G(active[a], active[b]);
            H(a, a) += 2.0 * lambda * (1.0 - alpha);
            r(a) = c(active[a]) - lambda * alpha * sign[static_cast<std::size_t>(active[a])];
        }
        Eigen::FullPivLU<MatrixXd> lu(H);
        if (!lu.isInvertible()) continue;
        const VectorXd b = lu.solve(r);
        bool consistent = true;
        for (Index a = 0; a < m && consistent; ++a)
            consistent = b(a) * sign[static_cast<std::size_t>(active[a])] > 0;
        if (!consistent) continue;
        VectorXd beta = VectorXd::Zero(p);
        for (Index a = 0; a < m; ++a) beta(active[a]) = b(a);
        const double icpt = ybar - xbar.dot(beta);
        const double obj = reference_objective(X, y, icpt, beta, lambda, alpha);
        if (obj < best.objective) best = ReferenceSolution{icpt, beta, obj};
    }
    return best;
}

VectorXd kkt_violation(const MatrixXd& X, const VectorXd& y, double intercept, const VectorXd& beta, double lambda,
                       double alpha, const std::vector<bool>& skip) {
    const Index n = X.rows(), p = X.cols();
    VectorXd r(n);
    for (Index i = 0; i < n; ++i) {
        double f = intercept;
        for (Index j = 0; j < p; ++j) f += X(i, j) * beta(j);
        r(i) = y(i) - f;
    }
    VectorXd v = VectorXd::Zero(p);
    for (Index j = 0; j < p; ++j) {
        if (!skip.empty() && skip[static_cast<std::size_t>(j)]) continue;
        double g = 0.0;
        for (Index i = 0; i < n; ++i) g += X(i, j) * r(i);
        g = 2.0 * g / static_cast<double>(n) - 2.0 * lambda * (1.0 - alpha) * beta(j);
        if (beta(j) != 0.0)
            v(j) = std::abs(g - lambda * alpha * (beta(j) > 0 ? 1.0 : -1.0));
        else
            v(j) = std::max(0.0, std::abs(g) - lambda * alpha);
    }
    return v;
}

RegressionInstance random_regression(int n, int p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RegressionInstance inst;
    inst.X.resize(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) inst.X(i, j) = z(rng) + (j > 0 ? 0.5 * inst.X(i, j - 1) : 0.0);
    VectorXd beta(p);
    for (int j = 0; j < p; ++j) beta(j) = u(rng) < 0.5 ? 0.0 : 2.0 * z(rng);
    inst.y = inst.X * beta;
    for (int i = 0; i < n; ++i) inst.y(i) += 1.5 + 0.5 * z(rng);
    return inst;
}

}  // namespace dpr::testkit
