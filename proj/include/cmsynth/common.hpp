#pragma once

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cmsynth {

using cd = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using MatrixXcd = Eigen::MatrixXcd;
using VectorXcd = Eigen::VectorXcd;
using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;

inline constexpr cd kJ{0.0, 1.0};
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kC0 = 299792458.0;
inline constexpr double kMu0 = 4.0e-7 * kPi;
inline constexpr double kEps0 = 1.0 / (kMu0 * kC0 * kC0);
inline constexpr double kEta0 = kMu0 * kC0;

inline double wavelength(double frequency_hz) { return kC0 / frequency_hz; }
inline double wavenumber(double frequency_hz) {
  return 2.0 * kPi * frequency_hz / kC0;
}

// Error hierarchy. kind() is the machine-readable tag the CLI reports.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what) : Error("geometry", what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error("index", what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

// Numerical failures carry an optional diagnostic value (condition estimate,
// smallest eigenvalue, ...).
class NumericalError : public Error {
 public:
  NumericalError(std::string kind, const std::string& what, double diagnostic)
      : Error(std::move(kind), what), diagnostic_(diagnostic) {}
  double diagnostic() const noexcept { return diagnostic_; }

 private:
  double diagnostic_;
};

// Constraint violations on GSM inputs (unmatched ports, non-unit norms, ...).
class ConstraintError : public Error {
 public:
  explicit ConstraintError(const std::string& what) : Error("constraint", what) {}
};

}  // namespace cmsynth
