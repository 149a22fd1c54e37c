#pragma once

// Field dumps and number formatting shared by the command-line tool.

#include <iosfwd>
#include <string>

#include "nlhom/periodic_cell.hpp"

namespace nlhom {

/// Shortest text that reads back to the same double (17 significant digits).
std::string format_double(double v);

/// Binary dump: "NLHF", u32 version, u32 n, u32 c, then n^3 c little-endian f64 in field layout.
void write_field_binary(std::ostream& out, const Field& f);
Field read_field_binary(std::istream& in);
void save_field_binary(const std::string& path, const Field& f);
Field load_field_binary(const std::string& path);

/// Text export, header "i1,i2,i3,comp,value".
void write_field_csv(std::ostream& out, const Field& f);

}  // namespace nlhom
