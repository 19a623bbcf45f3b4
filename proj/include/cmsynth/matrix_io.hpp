#pragma once

// Plain-text complex matrix format:
//
//   rows cols frequency_hz
//   re:im re:im ...        (one line per row)
//
// Values are written with 17 significant digits so a write/read cycle
// reproduces every double bit for bit.

#include "cmsynth/common.hpp"

#include <iosfwd>
#include <string>

namespace cmsynth::io {

struct TextMatrix {
  MatrixXcd values;
  double frequency_hz = 0.0;
};

void write_matrix(std::ostream& out, const MatrixXcd& m, double frequency_hz);
std::string format_matrix(const MatrixXcd& m, double frequency_hz);

TextMatrix read_matrix(std::istream& in);
TextMatrix parse_matrix(const std::string& text);

void save_matrix(const std::string& path, const MatrixXcd& m,
                 double frequency_hz);
TextMatrix load_matrix(const std::string& path);

// Shortest-form 17-significant-digit rendering of one double.
std::string format_double(double x);

}  // namespace cmsynth::io
