#include "cmsynth/gsm.hpp"

#include "cmsynth/matrix_io.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

namespace cmsynth {

namespace {

using json = nlohmann::json;

constexpr double kUnitTol = 1e-9;

void require_s0(const VectorXcd& s0, const MatrixXcd& t) {
  if (s0.size() != t.rows()) {
    throw DimensionError("S0 and T disagree on the mode count");
  }
}

MatrixXcd identity(Eigen::Index n) { return MatrixXcd::Identity(n, n); }

}  // namespace

double wrap_half_pi(double x) { return x - kPi * std::ceil((x - 0.5 * kPi) / kPi); }

double wrap_pi(double x) { return x - 2.0 * kPi * std::ceil((x - kPi) / (2.0 * kPi)); }

MatrixXcd Gsm::psi() const {
  const auto n = S.rows();
  const auto p = T.cols();
  MatrixXcd out(n + p, n + p);
  out << S, T, R, Gamma;
  return out;
}

cd eigenvalue_to_scattering(double lambda) {
  if (std::isinf(lambda)) return 1.0;
  return -(1.0 - kJ * lambda) / (1.0 + kJ * lambda);
}

double scattering_to_eigenvalue(cd s) {
  if (s == cd(1.0)) return std::numeric_limits<double>::infinity();
  return std::real(-kJ * (1.0 + s) / (1.0 - s));
}

VectorXcd s0_from_eigenvalues(const VectorXd& lambda) {
  VectorXcd s(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    s[i] = eigenvalue_to_scattering(lambda[i]);
  }
  return s;
}

MatrixXcd transmit_from_ports(const CharacteristicBasis& basis,
                              const ImpedanceMatrix& z0,
                              const MatrixXcd& port_currents) {
  if (z0.entries.rows() != basis.basis_count() ||
      z0.entries.cols() != basis.basis_count() ||
      port_currents.rows() != basis.basis_count()) {
    throw DimensionError("port currents, Z0 and the modal basis disagree");
  }
  MatrixXcd t = basis.eigencurrents.transpose().cast<cd>() *
                (z0.entries * port_currents);
  for (int n = 0; n < basis.mode_count(); ++n) {
    t.row(n) /= (1.0 + kJ * basis.eigenvalues[n]);
  }
  return t;
}

MatrixXcd scattering_from_s0_and_t(const VectorXcd& s0, const MatrixXcd& t) {
  require_s0(s0, t);
  const double mismatch = (t.adjoint() * t - identity(t.cols())).norm();
  if (mismatch > kUnitTol) {
    throw ConstraintError("transmit block is not matched (T^H T != I), deviation " +
                          io::format_double(mismatch));
  }
  return s0.asDiagonal() * (identity(t.rows()) - t.conjugate() * t.transpose());
}

double reciprocity_residual(const VectorXcd& s0, const MatrixXcd& t) {
  require_s0(s0, t);
  const MatrixXcd a = s0.asDiagonal() * t.conjugate() * t.transpose();
  const MatrixXcd b = t * t.adjoint() * s0.asDiagonal();
  return (a - b).norm();
}

MatrixXcd scattering_via_termination(const VectorXcd& s0, const MatrixXcd& t,
                                     const MatrixXcd& r, const MatrixXcd& gamma,
                                     const MatrixXcd& gamma_l0) {
  require_s0(s0, t);
  const auto p = t.cols();
  if (r.rows() != p || r.cols() != t.rows() || gamma.rows() != p ||
      gamma.cols() != p || gamma_l0.rows() != p || gamma_l0.cols() != p) {
    throw DimensionError("GSM blocks have inconsistent sizes");
  }
  MatrixXcd s = s0.asDiagonal();
  if (p == 0) return s;
  Eigen::PartialPivLU<MatrixXcd> lu(gamma_l0 - gamma);
  const double rc = lu.rcond();
  if (!(rc > 1e-14)) {
    throw NumericalError("termination", "Gamma_L0 - Gamma is singular", rc);
  }
  return s - t * lu.solve(r);
}

VectorXcd transmit_for_termination(const VectorXcd& s0,
                                   const VectorXd& magnitudes, cd gamma) {
  if (s0.size() != magnitudes.size()) {
    throw DimensionError("S0 and magnitude vector differ in length");
  }
  // s_n exp(-j phi_n) = exp(j phi_n) / gamma  =>  2 phi_n = angle s_n + angle gamma.
  VectorXcd t(s0.size());
  for (Eigen::Index n = 0; n < s0.size(); ++n) {
    const double phi = 0.5 * (std::arg(s0[n]) + std::arg(gamma));
    t[n] = std::polar(magnitudes[n], phi);
  }
  return t;
}

LosslessReport assert_lossless(const Gsm& g, double tolerance) {
  LosslessReport r;
  r.tolerance = tolerance;
  const MatrixXcd psi = g.psi();
  r.unitarity = (psi.adjoint() * psi - identity(psi.rows())).norm();
  r.symmetry = (g.S - g.S.transpose()).norm();
  r.matched = (g.T.adjoint() * g.T - identity(g.T.cols())).norm();
  r.orthogonality = (g.S.adjoint() * g.T).norm();
  return r;
}

Gsm build_synthetic_gsm(const SyntheticElementParams& params) {
  const auto n = params.s_phases.size();
  if (n == 0 || params.t_magnitudes.size() != n) {
    throw DimensionError("synthetic element needs matching phase and magnitude lists");
  }
  if (std::abs(std::abs(params.sigma) - 1.0) > kUnitTol) {
    throw ConstraintError("sigma must have unit modulus");
  }
  double norm2 = 0.0;
  for (double m : params.t_magnitudes) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw ConstraintError("transmit magnitudes must be finite and nonnegative");
    }
    norm2 += m * m;
  }
  if (std::abs(norm2 - 1.0) > kUnitTol) {
    throw ConstraintError("transmit magnitudes are not unit norm (sum of squares " +
                          io::format_double(norm2) + ")");
  }
  const double s1 = params.s_phases[0];
  const double t1 = wrap_half_pi(0.5 * (s1 - std::arg(params.sigma)));
  Gsm g;
  g.s0.resize(static_cast<Eigen::Index>(n));
  g.T.resize(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    g.s0[ii] = std::polar(1.0, params.s_phases[i]);
    const double phase = t1 + wrap_half_pi(0.5 * (params.s_phases[i] - s1));
    g.T(ii, 0) = std::polar(params.t_magnitudes[i], phase);
  }
  g.S = scattering_from_s0_and_t(g.s0, g.T);
  g.R = g.T.transpose();
  g.Gamma = MatrixXcd::Zero(1, 1);
  g.termination = std::conj(params.sigma);
  return g;
}

Gsm synthetic_from_transmit(const VectorXcd& t, cd sigma) {
  if (t.size() == 0) throw DimensionError("empty transmit vector");
  if (std::abs(t.norm() - 1.0) > kUnitTol) {
    throw ConstraintError("transmit vector is not unit norm");
  }
  Gsm g;
  g.s0.resize(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    g.s0[i] = sigma * std::polar(1.0, 2.0 * std::arg(t[i]));
  }
  g.T = t;
  g.S = scattering_from_s0_and_t(g.s0, g.T);
  g.R = g.T.transpose();
  g.Gamma = MatrixXcd::Zero(1, 1);
  g.termination = std::conj(sigma);
  return g;
}

SyntheticElementParams synthetic_params(const Gsm& g, cd sigma) {
  if (g.port_count() != 1) throw DimensionError("synthetic elements have one port");
  SyntheticElementParams p;
  p.sigma = sigma;
  for (int n = 0; n < g.mode_count(); ++n) {
    p.s_phases.push_back(std::arg(g.s0[n]));
    p.t_magnitudes.push_back(std::abs(g.T(n, 0)));
  }
  return p;
}

Gsm measured_element_gsm(const CharacteristicBasis& basis,
                         const ImpedanceMatrix& z0,
                         const std::vector<int>& port_basis, double zref) {
  const MatrixXcd ip = port_drive_columns(z0, port_basis, zref);
  const auto np = static_cast<Eigen::Index>(port_basis.size());
  Gsm g;
  g.reference_impedance = zref;
  g.termination = -1.0;
  g.T = transmit_from_ports(basis, z0, ip);
  g.Gamma = identity(np);
  for (Eigen::Index p = 0; p < np; ++p) {
    for (Eigen::Index q = 0; q < np; ++q) {
      g.Gamma(p, q) -= std::sqrt(zref) * ip(port_basis[p], q);
    }
  }
  if ((g.Gamma - g.Gamma.transpose()).norm() > 1e-8 * std::max(1.0, g.Gamma.norm())) {
    throw ConstraintError("port reflection block is not symmetric; element is not reciprocal");
  }
  g.R = g.T.transpose();
  g.s0 = s0_from_eigenvalues(basis.eigenvalues);
  g.S = scattering_via_termination(g.s0, g.T, g.R, g.Gamma, -identity(np));
  return g;
}

std::string gsm_to_json(const Gsm& g) {
  json j;
  j["convention"] = {
      {"waves", "power"},
      {"outgoing_modal", "f = b - a"},
      {"termination", g.termination == cd(-1.0)  ? "short"
                      : g.termination == cd(1.0) ? "open"
                                                 : "synthetic"},
      {"termination_value", {g.termination.real(), g.termination.imag()}},
      {"reference_impedance", g.reference_impedance}};
  j["modes"] = g.mode_count();
  j["ports"] = g.port_count();
  j["S"] = io::format_matrix(g.S, 0.0);
  j["T"] = io::format_matrix(g.T, 0.0);
  j["R"] = io::format_matrix(g.R, 0.0);
  j["Gamma"] = io::format_matrix(g.Gamma, 0.0);
  j["S0"] = io::format_matrix(g.s0, 0.0);
  return j.dump(2) + "\n";
}

Gsm gsm_from_json(const std::string& text) {
  Gsm g;
  try {
    const json j = json::parse(text);
    if (!j.contains("convention")) throw FormatError("GSM file lacks the convention field");
    const auto& c = j.at("convention");
    const auto tv = c.at("termination_value").get<std::vector<double>>();
    if (tv.size() != 2) throw FormatError("termination_value must be [re, im]");
    g.termination = cd(tv[0], tv[1]);
    g.reference_impedance = c.at("reference_impedance").get<double>();
    g.S = io::parse_matrix(j.at("S").get<std::string>()).values;
    g.T = io::parse_matrix(j.at("T").get<std::string>()).values;
    g.R = io::parse_matrix(j.at("R").get<std::string>()).values;
    g.Gamma = io::parse_matrix(j.at("Gamma").get<std::string>()).values;
    const MatrixXcd s0 = io::parse_matrix(j.at("S0").get<std::string>()).values;
    if (s0.cols() != 1) throw FormatError("S0 must be stored as a column");
    g.s0 = s0.col(0);
  } catch (const json::exception& e) {
    throw FormatError(std::string("GSM: ") + e.what());
  }
  const auto n = g.S.rows();
  const auto p = g.T.cols();
  if (g.S.cols() != n || g.T.rows() != n || g.R.rows() != p || g.R.cols() != n ||
      g.Gamma.rows() != p || g.Gamma.cols() != p || g.s0.size() != n) {
    throw DimensionError("GSM blocks have inconsistent sizes");
  }
  return g;
}

}  // namespace cmsynth
