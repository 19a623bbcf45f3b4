#include "cmsynth/matrix_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cmsynth::io {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_matrix(std::ostream& out, const MatrixXcd& m, double frequency_hz) {
  out << m.rows() << ' ' << m.cols() << ' ' << format_double(frequency_hz)
      << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ' ';
      out << format_double(m(r, c).real()) << ':'
          << format_double(m(r, c).imag());
    }
    out << '\n';
  }
}

std::string format_matrix(const MatrixXcd& m, double frequency_hz) {
  std::ostringstream out;
  write_matrix(out, m, frequency_hz);
  return out.str();
}

namespace {

double parse_number(const std::string& token, const char* what) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE) {
    throw FormatError(std::string("matrix: bad ") + what + " '" + token + "'");
  }
  return v;
}

}  // namespace

TextMatrix read_matrix(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("matrix: missing header");
  std::istringstream hs(header);
  long long rows = -1, cols = -1;
  std::string freq_token;
  if (!(hs >> rows >> cols >> freq_token) || rows < 0 || cols < 0) {
    throw FormatError("matrix: header must be 'rows cols frequency_hz'");
  }
  TextMatrix result;
  result.frequency_hz = parse_number(freq_token, "frequency");
  result.values.resize(rows, cols);
  for (long long r = 0; r < rows; ++r) {
    std::string line;
    if (!std::getline(in, line)) {
      throw FormatError("matrix: expected " + std::to_string(rows) +
                        " rows, got " + std::to_string(r));
    }
    std::istringstream ls(line);
    std::string token;
    long long c = 0;
    while (ls >> token) {
      if (c >= cols) throw FormatError("matrix: too many columns in row " + std::to_string(r));
      const auto colon = token.find(':');
      if (colon == std::string::npos) {
        throw FormatError("matrix: entry '" + token + "' is not re:im");
      }
      result.values(r, c) = {parse_number(token.substr(0, colon), "real part"),
                             parse_number(token.substr(colon + 1), "imaginary part")};
      ++c;
    }
    if (c != cols) {
      throw FormatError("matrix: row " + std::to_string(r) + " has " +
                        std::to_string(c) + " entries, expected " +
                        std::to_string(cols));
    }
  }
  return result;
}

TextMatrix parse_matrix(const std::string& text) {
  std::istringstream in(text);
  return read_matrix(in);
}

void save_matrix(const std::string& path, const MatrixXcd& m,
                 double frequency_hz) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_matrix(out, m, frequency_hz);
}

TextMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  return read_matrix(in);
}

}  // namespace cmsynth::io
