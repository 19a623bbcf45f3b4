#pragma once

// Coupled system of K element GSMs:
//   f = (S - I)(a_ext + G f) + T v,   w = Gamma v + R (a_ext + G f)
// with block-diagonal S, T, R, Gamma over the elements.

#include "cmsynth/common.hpp"
#include "cmsynth/coupling.hpp"
#include "cmsynth/gsm.hpp"
#include "cmsynth/modal_core.hpp"
#include "cmsynth/mom_kernel.hpp"

#include <string>
#include <vector>

namespace cmsynth {

struct ArrayModel {
  std::vector<Gsm> elements;
  ModalCouplingMatrix coupling;
  std::vector<CharacteristicBasis> bases;

  int total_modes() const;
  int total_ports() const;
  void validate() const;
};

struct StackedGsm {
  MatrixXcd S, T, R, Gamma;
};

StackedGsm stack_isolated(const ArrayModel& model);

struct CoupledBlocks {
  MatrixXcd S;  // S^(coupled); S - I = A^-1 (S_iso - I)
  MatrixXcd T;  // A^-1 T_iso
  MatrixXcd R;  // R_iso + R_iso G A^-1 (S_iso - I)
  MatrixXcd Gamma;
  double rcond = 0.0;  // of A = I - (S_iso - I) G
};

// LU-based evaluation of the coupled blocks.
CoupledBlocks couple(const ArrayModel& model);

struct CoupledSolution {
  VectorXcd v, w, a_ext;
  VectorXcd f;  // stacked outgoing modal coefficients
  CoupledBlocks blocks;
  double modal_residual = 0.0;  // relative residual of the f row
  double port_residual = 0.0;   // relative residual of the w row
};

CoupledSolution solve_excitation(const ArrayModel& model, const VectorXcd& v,
                                 const VectorXcd& a_ext);

struct IterativeResult {
  VectorXcd f;
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;
};

// Fixed-point iteration f <- (S - I)(a_ext + G f) + T v.
IterativeResult solve_iterative(const ArrayModel& model, const VectorXcd& v,
                                const VectorXcd& a_ext, double tol = 1e-13,
                                int max_iter = 10000);

// Spectral radius of (S_iso - I) G.
double coupling_spectral_radius(const ArrayModel& model);

// I^(k) = I_CM^(k) f^(k), one vector per element.
std::vector<VectorXcd> element_currents(const VectorXcd& f,
                                        const std::vector<CharacteristicBasis>& bases);

// F = sum_k sum_n F_CM,n^(k) f_n^(k).
FarFieldCut array_farfield(const VectorXcd& f,
                           const std::vector<CharacteristicBasis>& bases,
                           const CutSpec& cut, std::string label = {});

struct DirectSolution {
  PortSolution ports;
  std::vector<VectorXcd> element_currents;
};

DirectSolution direct_solve_oracle(const WireMesh& mesh, double frequency_hz,
                                   const VectorXcd& v, double zref);
DirectSolution direct_solve_oracle(const WireMesh& mesh, const ImpedanceMatrix& z,
                                   const VectorXcd& v, double zref);

enum class Handedness { Left, Right };

struct CircularCut {
  std::vector<double> theta_deg;
  std::vector<cd> e_left;
  std::vector<cd> e_right;
  double xpr_db = 0.0;  // co over cross, capped at kXprCapDb
};

inline constexpr double kXprCapDb = 100.0;

// E_L = (e_theta + j e_phi)/sqrt2, E_R = (e_theta - j e_phi)/sqrt2. The XPR
// uses samples with theta in [theta_min, theta_max] degrees.
CircularCut circular_components(const FarFieldCut& cut,
                                Handedness co = Handedness::Left,
                                double theta_min = -1e300, double theta_max = 1e300);

double ratio_db(double co_power, double cross_power);

// CSV: theta_deg, re/im e_theta, re/im e_phi, |E_L| dB, |E_R| dB.
std::string cut_to_csv(const FarFieldCut& cut);

}  // namespace cmsynth
