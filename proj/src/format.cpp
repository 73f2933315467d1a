#include "dpr/format.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>

namespace dpr {

std::string fmt_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string_view trim(std::string_view s) {
    const auto blank = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && blank(s.front())) s.remove_prefix(1);
    while (!s.empty() && blank(s.back())) s.remove_suffix(1);
    return s;
}

bool parse_real(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty()) return false;
    std::string buf(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size() || errno == ERANGE) return false;
    out = v;
    return true;
}

std::vector<std::string> split_line(std::string_view line, char delim) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            cells.emplace_back(trim(line.substr(start)));
            break;
        }
        cells.emplace_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

TableWriter::TableWriter(std::ostream& out, char delim) : out_(out), delim_(delim) {}

void TableWriter::header(const std::vector<std::string>& cols) {
    for (const auto& c : cols) cell(c);
    end_row();
}

TableWriter& TableWriter::cell(std::string_view text) {
    if (row_open_) out_ << delim_;
    out_ << text;
    row_open_ = true;
    return *this;
}

TableWriter& TableWriter::cell(double v) { return cell(std::string_view(fmt_real(v))); }

TableWriter& TableWriter::cell(long long v) { return cell(std::string_view(std::to_string(v))); }

void TableWriter::end_row() {
    out_ << '\n';
    row_open_ = false;
}

}  // namespace dpr
