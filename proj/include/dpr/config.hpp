#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dpr/data_model.hpp"
#include "dpr/pipeline.hpp"

namespace dpr {

/// Grid syntax shared by config files and CLI flags:
///   "0.1,0.2,0.5"      explicit list
///   "0.5:0:0.01"       inclusive range start:stop:step (direction from start/stop)
///   "log:1e-4:1:30"    30 log-spaced values from 1 down to 1e-4
std::vector<double> parse_real_grid(const std::string& text);
std::vector<int> parse_int_grid(const std::string& text);

/// Declarative run configuration. Keys mirror DprConfig plus the input
/// schema and the split; see README for the full key list.
struct RunConfig {
    std::string input;
    std::string factors;  // optional emission factor table
    PanelSchema schema;
    std::size_t test_periods = 0;
    DprConfig dpr;

    /// Applies one key. Throws InputError on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    /// Applies every `key = value` line; '#' starts a comment.
    void apply(std::istream& in);
    void apply_file(const std::string& path);

    /// Last value applied for each key.
    const std::map<std::string, std::string>& applied() const { return applied_; }

private:
    std::map<std::string, std::string> applied_;
};

char parse_delimiter(const std::string& s);
bool parse_bool(const std::string& s);

}  // namespace dpr
