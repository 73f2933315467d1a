#include "dpr/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>

#include "dpr/errors.hpp"
#include "dpr/format.hpp"

namespace dpr {

namespace {

double real_or_throw(const std::string& key, std::string_view text) {
    double v;
    if (!parse_real(text, v)) throw InputError("bad numeric value '" + std::string(text) + "' for " + key);
    return v;
}

long long int_or_throw(const std::string& key, std::string_view text) {
    const double v = real_or_throw(key, text);
    if (v != std::floor(v) || std::abs(v) > 1e15) throw InputError("expected an integer for " + key);
    return static_cast<long long>(v);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    for (auto& s : split_line(text, ','))
        if (!s.empty()) out.push_back(s);
    return out;
}

}  // namespace

std::vector<double> parse_real_grid(const std::string& text_in) {
    const std::string text(trim(text_in));
    if (text.empty()) throw InputError("empty grid");
    std::vector<double> out;
    if (text.rfind("log:", 0) == 0) {
        const auto parts = split_line(std::string_view(text).substr(4), ':');
        if (parts.size() != 3) throw InputError("log grid must be log:lo:hi:count");
        const double lo = real_or_throw("grid", parts[0]);
        const double hi = real_or_throw("grid", parts[1]);
        const auto n = int_or_throw("grid", parts[2]);
        if (!(lo > 0) || !(hi >= lo) || n < 1) throw InputError("log grid needs 0 < lo <= hi and count >= 1");
        if (n == 1) return {hi};
        for (long long i = 0; i < n; ++i)
            out.push_back(std::exp(std::log(hi) + (std::log(lo) - std::log(hi)) * static_cast<double>(i) /
                                                      static_cast<double>(n - 1)));
        out.back() = lo;
        out.front() = hi;
        return out;
    }
    if (text.find(':') != std::string::npos) {
        const auto parts = split_line(text, ':');
        if (parts.size() != 3) throw InputError("range grid must be start:stop:step");
        const double start = real_or_throw("grid", parts[0]);
        const double stop = real_or_throw("grid", parts[1]);
        const double step = std::abs(real_or_throw("grid", parts[2]));
        if (!(step > 0)) throw InputError("range step must be non-zero");
        const double dir = stop >= start ? 1.0 : -1.0;
        const auto count = static_cast<long long>(std::floor(std::abs(stop - start) / step + 1e-9)) + 1;
        for (long long i = 0; i < count; ++i) {
            // 12 significant digits strips the representation error of
            // the step, so 0.5:0:0.01 yields 0.35 rather than 0.35000000000000003
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.12g", start + dir * step * static_cast<double>(i));
            double v = std::strtod(buf, nullptr);
            if (std::abs(v) < step * 1e-9) v = 0.0;
            out.push_back(v);
        }
        return out;
    }
    for (const auto& s : split_list(text)) out.push_back(real_or_throw("grid", s));
    if (out.empty()) throw InputError("empty grid");
    return out;
}

std::vector<int> parse_int_grid(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_real_grid(text)) {
        if (v != std::floor(v)) throw InputError("integer grid has a non-integer value");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

char parse_delimiter(const std::string& s) {
    if (s == "comma" || s == ",") return ',';
    if (s == "tab" || s == "\\t" || s == "\t") return '\t';
    if (s == "semicolon" || s == ";") return ';';
    if (s.size() == 1) return s[0];
    throw InputError("unknown delimiter '" + s + "'");
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw InputError("expected a boolean, got '" + s + "'");
}

void RunConfig::set(const std::string& key, const std::string& raw) {
    const std::string value(trim(raw));
    auto& d = dpr;
    if (key == "input") input = value;
    else if (key == "factors") factors = value;
    else if (key == "delimiter") schema.delimiter = parse_delimiter(value);
    else if (key == "entity_col") schema.entity_col = value;
    else if (key == "period_col") schema.period_col = value;
    else if (key == "target_col") schema.target_col = value;
    else if (key == "features") schema.features = split_list(value);
    else if (key == "log_offset") d.transform.log_offset = real_or_throw(key, value);
    else if (key == "normalize_mode") d.transform.normalize_mode = parse_normalize_mode(value);
    else if (key == "use_clusters") d.use_clusters = parse_bool(value);
    else if (key == "eps") {
        if (!d.dbscan) d.dbscan = DbscanParams{0.0, d.min_pts_grid.empty() ? 3 : d.min_pts_grid.front(), d.core_strict};
        d.dbscan->eps = real_or_throw(key, value);
    } else if (key == "min_pts") {
        const auto m = static_cast<int>(int_or_throw(key, value));
        d.min_pts_grid = {m};
        if (d.dbscan) d.dbscan->min_pts = m;
    } else if (key == "core_strict") {
        d.core_strict = parse_bool(value);
        if (d.dbscan) d.dbscan->core_strict = d.core_strict;
    } else if (key == "eps_grid") d.eps_grid = parse_real_grid(value);
    else if (key == "eps_quantiles") {
        const auto parts = split_line(value, ':');
        if (parts.size() != 3) throw InputError("eps_quantiles must be lo:hi:count");
        d.eps_quantiles = EpsQuantiles{real_or_throw(key, parts[0]), real_or_throw(key, parts[1]),
                                       static_cast<int>(int_or_throw(key, parts[2]))};
    } else if (key == "minpts_grid") d.min_pts_grid = parse_int_grid(value);
    else if (key == "penalty_kind") d.penalty_kind = parse_penalty_kind(value);
    else if (key == "lambda_grid") d.lambda_grid = parse_real_grid(value);
    else if (key == "alpha_grid") d.alpha_grid = parse_real_grid(value);
    else if (key == "outlier_policy") d.outlier_policy = parse_outlier_policy(value);
    else if (key == "baseline_cluster") d.baseline_cluster = static_cast<int>(int_or_throw(key, value));
    else if (key == "test_periods") test_periods = static_cast<std::size_t>(int_or_throw(key, value));
    else if (key == "validation_periods") d.validation_periods = static_cast<std::size_t>(int_or_throw(key, value));
    else if (key == "cv_folds") d.cv_folds = static_cast<int>(int_or_throw(key, value));
    else if (key == "fold_mode") d.fold_mode = parse_fold_mode(value);
    else if (key == "tol") d.solver.tol = real_or_throw(key, value);
    else if (key == "max_iter") d.solver.max_iter = int_or_throw(key, value);
    else if (key == "threads") d.threads = static_cast<unsigned>(std::max(1LL, int_or_throw(key, value)));
    else if (key == "refit_clusters_full") d.refit_clusters_full = parse_bool(value);
    else throw InputError("unknown config key '" + key + "'");
    applied_[key] = value;
}

void RunConfig::apply(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
        set(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
    }
}

void RunConfig::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    apply(in);
}

}  // namespace dpr
