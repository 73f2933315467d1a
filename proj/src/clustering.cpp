#include "dpr/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

#include "dpr/errors.hpp"
#include "parallel.hpp"

namespace dpr {

void DbscanParams::validate() const {
    if (!(eps > 0) || !std::isfinite(eps)) throw InputError("dbscan eps must be a finite value > 0");
    if (min_pts < 1) throw InputError("dbscan min_pts must be >= 1");
}

std::size_t ClusterModel::noise_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
}

namespace {

using Index = Eigen::Index;

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points) {
    const Index n = points.rows();
    Eigen::MatrixXd d(n, n);
    for (Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Index j = i + 1; j < n; ++j) {
            const double v = (points.row(i) - points.row(j)).norm();
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

std::vector<int> canonical_relabel(const std::vector<int>& raw, int& k) {
    std::map<int, int> rename;
    std::vector<int> out(raw.size(), kNoise);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == kNoise) continue;
        auto [it, fresh] = rename.emplace(raw[i], static_cast<int>(rename.size()));
        out[i] = it->second;
    }
    k = static_cast<int>(rename.size());
    return out;
}

ClusterModel dbscan_from_distances(const Eigen::MatrixXd& dist, const DbscanParams& params) {
    const Index n = dist.rows();
    std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(n));
    ClusterModel m;
    m.params = params;
    m.core.assign(static_cast<std::size_t>(n), false);
    for (Index i = 0; i < n; ++i) {
        auto& nb = nbrs[static_cast<std::size_t>(i)];
        for (Index j = 0; j < n; ++j)
            if (dist(i, j) <= params.eps) nb.push_back(j);
        const auto count = static_cast<long long>(nb.size());
        m.core[static_cast<std::size_t>(i)] = params.core_strict ? count > params.min_pts : count >= params.min_pts;
    }

    std::vector<int> raw(static_cast<std::size_t>(n), kNoise);
    int next = 0;
    std::deque<Index> frontier;
    for (Index i = 0; i < n; ++i) {
        if (!m.core[static_cast<std::size_t>(i)] || raw[static_cast<std::size_t>(i)] != kNoise) continue;
        raw[static_cast<std::size_t>(i)] = next;
        frontier.push_back(i);
        while (!frontier.empty()) {
            const Index p = frontier.front();
            frontier.pop_front();
            for (Index q : nbrs[static_cast<std::size_t>(p)]) {
                const auto uq = static_cast<std::size_t>(q);
                if (m.core[uq] && raw[uq] == kNoise) {
                    raw[uq] = next;
                    frontier.push_back(q);
                }
            }
        }
        ++next;
    }
    // border points: the lowest-index core in range claims them
    for (Index i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (m.core[ui]) continue;
        for (Index q : nbrs[ui]) {
            if (m.core[static_cast<std::size_t>(q)]) {
                raw[ui] = raw[static_cast<std::size_t>(q)];
                break;
            }
        }
    }
    m.labels = canonical_relabel(raw, m.k);
    return m;
}

void score(ClusterModel& m, const Eigen::MatrixXd& points) {
    m.sse = m.k >= 1 ? sse(points, m.labels) : 0.0;
    m.sc.reset();
    if (m.k >= 2) {
        std::vector<int> sizes(static_cast<std::size_t>(m.k), 0);
        for (int l : m.labels)
            if (l != kNoise) ++sizes[static_cast<std::size_t>(l)];
        if (*std::max_element(sizes.begin(), sizes.end()) >= 2) m.sc = silhouette_sc(points, m.labels);
    }
}

}  // namespace

std::vector<Eigen::Index> region_query(const Eigen::MatrixXd& points, Eigen::Index i, double eps) {
    std::vector<Index> out;
    for (Index j = 0; j < points.rows(); ++j)
        if ((points.row(i) - points.row(j)).norm() <= eps) out.push_back(j);
    return out;
}

ClusterModel dbscan(const Eigen::MatrixXd& points, const DbscanParams& params) {
    params.validate();
    if (points.rows() < 1) throw InputError("dbscan needs at least one point");
    if (!points.allFinite()) throw InputError("dbscan input has non-finite coordinates");
    auto m = dbscan_from_distances(pairwise_distances(points), params);
    score(m, points);
    return m;
}

double silhouette_sc(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
    std::map<int, std::vector<Index>> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kNoise) members[labels[i]].push_back(static_cast<Index>(i));
    if (members.size() < 2) throw InputError("silhouette needs at least two clusters");

    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [label, own] : members) {
        for (Index i : own) {
            ++count;
            if (own.size() < 2) continue;  // singleton: s_i = 0
            double a = 0.0;
            for (Index j : own)
                if (j != i) a += (points.row(i) - points.row(j)).norm();
            a /= static_cast<double>(own.size() - 1);
            double b = std::numeric_limits<double>::infinity();
            for (const auto& [other, pts] : members) {
                if (other == label) continue;
                double s = 0.0;
                for (Index j : pts) s += (points.row(i) - points.row(j)).norm();
                b = std::min(b, s / static_cast<double>(pts.size()));
            }
            const double denom = std::max(a, b);
            if (denom > 0) total += (b - a) / denom;
        }
    }
    return total / static_cast<double>(count);
}

double sse(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
    std::map<int, std::pair<Eigen::RowVectorXd, std::size_t>> centroid;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kNoise) continue;
        auto [it, fresh] =
            centroid.try_emplace(labels[i], Eigen::RowVectorXd::Zero(points.cols()), std::size_t{0});
        it->second.first += points.row(static_cast<Index>(i));
        ++it->second.second;
    }
    for (auto& [l, c] : centroid) c.first /= static_cast<double>(c.second);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kNoise)
            total += (points.row(static_cast<Index>(i)) - centroid.at(labels[i]).first).squaredNorm();
    return total;
}

std::vector<double> k_distance_profile(const Eigen::MatrixXd& points, int k) {
    const Index n = points.rows();
    if (k < 1 || k >= n) throw InputError("k-distance needs 1 <= k < n");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    std::vector<double> d;
    for (Index i = 0; i < n; ++i) {
        d.clear();
        for (Index j = 0; j < n; ++j)
            if (j != i) d.push_back((points.row(i) - points.row(j)).norm());
        std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
        out.push_back(d[static_cast<std::size_t>(k - 1)]);
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

std::vector<double> k_distance_eps_grid(const Eigen::MatrixXd& points, int min_pts, double lo, double hi, int count) {
    if (!(lo >= 0 && lo <= hi && hi <= 1)) throw InputError("eps quantiles need 0 <= lo <= hi <= 1");
    if (count < 1) throw InputError("eps quantile grid needs count >= 1");
    auto kd = k_distance_profile(points, std::max(1, min_pts - 1));
    std::sort(kd.begin(), kd.end());
    const auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(kd.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(i);
        return i + 1 < kd.size() ? kd[i] + frac * (kd[i + 1] - kd[i]) : kd[i];
    };
    const double a = quantile(lo), b = quantile(hi);
    std::vector<double> grid;
    for (int i = 0; i < count; ++i)
        grid.push_back(count == 1 ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    // eps must stay positive when many points coincide
    for (auto& e : grid) e = std::max(e, std::numeric_limits<double>::min());
    return grid;
}

std::vector<ScanRow> scan_params(const Eigen::MatrixXd& points, const std::vector<double>& eps_grid,
                                 const std::vector<int>& min_pts_grid, bool core_strict, unsigned threads) {
    if (eps_grid.empty() || min_pts_grid.empty()) throw InputError("scan grids must be non-empty");
    if (points.rows() < 1) throw InputError("scan needs at least one point");
    for (double e : eps_grid)
        for (int m : min_pts_grid) DbscanParams{e, m, core_strict}.validate();
    const auto dist = pairwise_distances(points);
    std::vector<ScanRow> rows(eps_grid.size() * min_pts_grid.size());
    detail::parallel_for(rows.size(), threads, [&](std::size_t cell) {
        DbscanParams p{eps_grid[cell / min_pts_grid.size()], min_pts_grid[cell % min_pts_grid.size()], core_strict};
        auto m = dbscan_from_distances(dist, p);
        score(m, points);
        rows[cell] = ScanRow{p.eps, p.min_pts, m.k, m.noise_count(), m.sc, m.sse};
    });
    return rows;
}

std::optional<std::size_t> best_scan_row(const std::vector<ScanRow>& rows) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].sc) continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& r = rows[i];
        const auto& b = rows[*best];
        if (*r.sc > *b.sc ||
            (*r.sc == *b.sc && (r.noise < b.noise || (r.noise == b.noise && r.eps > b.eps))))
            best = i;
    }
    return best;
}

std::vector<int> assign_to_clusters(const ClusterModel& model, const Eigen::MatrixXd& train_points,
                                    const Eigen::MatrixXd& new_points) {
    if (train_points.cols() != new_points.cols()) throw InputError("cluster assignment: width mismatch");
    std::vector<int> out(static_cast<std::size_t>(new_points.rows()), kNoise);
    for (Index i = 0; i < new_points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < train_points.rows(); ++j) {
            if (!model.core[static_cast<std::size_t>(j)]) continue;
            const double d = (new_points.row(i) - train_points.row(j)).norm();
            if (d <= model.params.eps && d < best) {
                best = d;
                out[static_cast<std::size_t>(i)] = model.labels[static_cast<std::size_t>(j)];
            }
        }
    }
    return out;
}

}  // namespace dpr
