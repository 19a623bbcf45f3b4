#pragma once

// Generalized scattering matrix of one element:
//
//   [b]   [S  T] [a]
//   [w] = [R  G] [v]
//
// a, b: incoming/outgoing modal coefficients (f = b - a drives I = I_CM f);
// v, w: incident/reflected power waves at the ports.

#include "cmsynth/common.hpp"
#include "cmsynth/modal_core.hpp"
#include "cmsynth/mom_kernel.hpp"

#include <string>
#include <vector>

namespace cmsynth {

struct Gsm {
  MatrixXcd S;      // N x N
  MatrixXcd T;      // N x P
  MatrixXcd R;      // P x N
  MatrixXcd Gamma;  // P x P
  VectorXcd s0;     // diagonal of S0
  // Port termination Gamma_L0 = termination * I under which the element
  // scatters like S0: -1 (short) for wire elements, +1 (open), or the
  // reciprocity-consistent value conj(sigma) for synthetic elements.
  cd termination = -1.0;
  double reference_impedance = 50.0;

  int mode_count() const { return static_cast<int>(S.rows()); }
  int port_count() const { return static_cast<int>(T.cols()); }
  MatrixXcd S0() const { return s0.asDiagonal(); }
  MatrixXcd psi() const;
};

// s = -(1 - j lambda)/(1 + j lambda).
cd eigenvalue_to_scattering(double lambda);
// Inverse map; s = 1 gives +infinity.
double scattering_to_eigenvalue(cd s);
VectorXcd s0_from_eigenvalues(const VectorXd& lambda);

// t_{n,p} = I_CM,n^T Z0 I_p / (1 + j lambda_n); I_p solved for unit
// incident wave at port p with the other ports terminated.
MatrixXcd transmit_from_ports(const CharacteristicBasis& basis,
                              const ImpedanceMatrix& z0,
                              const MatrixXcd& port_currents);

// S = S0 (I - T* T^T); requires T^H T = I.
MatrixXcd scattering_from_s0_and_t(const VectorXcd& s0, const MatrixXcd& t);

// || S0 T* T^T - T T^H S0 ||_F.
double reciprocity_residual(const VectorXcd& s0, const MatrixXcd& t);

// S = S0 - T (Gamma_L0 - Gamma)^-1 R.
MatrixXcd scattering_via_termination(const VectorXcd& s0, const MatrixXcd& t,
                                     const MatrixXcd& r, const MatrixXcd& gamma,
                                     const MatrixXcd& gamma_l0);

// Transmit vector whose phases satisfy S0 T* = T gamma^-1 for a scalar
// termination gamma, with the given magnitudes.
VectorXcd transmit_for_termination(const VectorXcd& s0,
                                   const VectorXd& magnitudes, cd gamma);

struct LosslessReport {
  double unitarity = 0.0;      // ||Psi^H Psi - I||_F
  double symmetry = 0.0;       // ||S - S^T||_F
  double matched = 0.0;        // ||T^H T - I||_F
  double orthogonality = 0.0;  // ||S^H T||_F
  double tolerance = 1e-9;
  bool unitarity_ok() const { return unitarity < tolerance; }
  bool symmetry_ok() const { return symmetry < tolerance; }
  bool matched_ok() const { return matched < tolerance; }
  bool orthogonality_ok() const { return orthogonality < tolerance; }
  bool pass() const {
    return unitarity_ok() && symmetry_ok() && matched_ok() && orthogonality_ok();
  }
};

LosslessReport assert_lossless(const Gsm& psi, double tolerance = 1e-9);

struct SyntheticElementParams {
  std::vector<double> s_phases;      // angle of s_n', radians
  std::vector<double> t_magnitudes;  // |t_n'|, unit norm
  cd sigma{0.0, 1.0};                // +-j orientation constant
};

// S0' = diag(exp(j s_n)), T' phases from the reciprocity condition with
// angle(t_n/t_1) in (-90, 90] degrees and angle(t_1) tied to sigma.
Gsm build_synthetic_gsm(const SyntheticElementParams& params);

// S0' = sigma diag(exp(j 2 angle t_n)) for a unit-norm single-port T'.
Gsm synthetic_from_transmit(const VectorXcd& t, cd sigma);

// The s-phases and magnitudes describing a synthetic single-port GSM.
SyntheticElementParams synthetic_params(const Gsm& g, cd sigma);

// GSM of a real wire element from its modes and a port solve. R = T^T
// (reciprocity is checked through Gamma), Gamma_L0 = -I.
Gsm measured_element_gsm(const CharacteristicBasis& basis,
                         const ImpedanceMatrix& z0,
                         const std::vector<int>& port_basis, double zref);

std::string gsm_to_json(const Gsm& g);
Gsm gsm_from_json(const std::string& text);

// Angle wrapped into (-pi/2, pi/2] and (-pi, pi].
double wrap_half_pi(double x);
double wrap_pi(double x);

}  // namespace cmsynth
