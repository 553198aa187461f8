#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace gridpass {

/// Shortest round-trip decimal form (std::to_chars), so CSV output is
/// bit-for-bit reproducible.
std::string format_number(double v);

void write_csv_row(std::ostream& out, std::span<const std::string> cells);
void write_csv_row(std::ostream& out, std::span<const double> values);

}  // namespace gridpass
