#include "gridpass/csv.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace gridpass {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_csv_row(std::ostream& out, std::span<const std::string> cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) out << ',';
        out << cells[k];
    }
    out << '\n';
}

void write_csv_row(std::ostream& out, std::span<const double> values) {
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (k) out << ',';
        out << format_number(values[k]);
    }
    out << '\n';
}

}  // namespace gridpass
