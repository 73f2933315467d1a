#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dpr {

/// Round-trippable text for a double: 17 significant digits, "nan"/"inf"
/// spelled out so files stay parseable.
std::string fmt_real(double v);

/// Strict numeric parse of a whole cell (surrounding blanks allowed).
/// Returns false on any trailing garbage or empty input.
bool parse_real(std::string_view text, double& out);

std::vector<std::string> split_line(std::string_view line, char delim);

std::string_view trim(std::string_view s);

/// Minimal delimited-table writer. Every row is written immediately; the
/// header must come first.
class TableWriter {
public:
    TableWriter(std::ostream& out, char delim = ',');

    void header(const std::vector<std::string>& cols);
    TableWriter& cell(std::string_view text);
    TableWriter& cell(double v);
    TableWriter& cell(long long v);
    TableWriter& cell(int v) { return cell(static_cast<long long>(v)); }
    TableWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
    void end_row();

private:
    std::ostream& out_;
    char delim_;
    bool row_open_ = false;
};

}  // namespace dpr
