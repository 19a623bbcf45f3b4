#pragma once

#include "cmsynth/array_solver.hpp"
#include "cmsynth/coupling.hpp"
#include "cmsynth/gsm.hpp"
#include "cmsynth/layouts.hpp"
#include "cmsynth/modal_core.hpp"
#include "cmsynth/mom_kernel.hpp"
#include "cmsynth/workbench.hpp"

#include <random>
#include <vector>

namespace fixtures {

using namespace cmsynth;

inline constexpr double kF = 300e6;

inline double lam() { return wavelength(kF); }

// Symmetric complex matrix with positive definite real part; the real part is
// A A^T + shift and the imaginary part any symmetric matrix.
inline ImpedanceMatrix random_impedance(int n, std::mt19937_64& rng, double shift = 1e-2) {
  std::normal_distribution<double> nd;
  MatrixXd a(n, n), b(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      a(i, j) = nd(rng);
      b(i, j) = nd(rng);
    }
  }
  ImpedanceMatrix z;
  const MatrixXd re = a * a.transpose() / n + shift * MatrixXd::Identity(n, n);
  const MatrixXd im = (b + b.transpose()) / 2.0;
  z.entries = re.cast<cd>() + kJ * im.cast<cd>();
  z.frequency_hz = kF;
  return z;
}

inline VectorXcd random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = cd(nd(rng), nd(rng));
  return v;
}

// Unit-norm complex vector with n entries.
inline VectorXcd random_unit(int n, std::mt19937_64& rng) {
  VectorXcd v = random_vector(n, rng);
  return v / v.norm();
}

inline WireMesh straight_dipole(double length, double radius, int segments) {
  WireGeometry g;
  DipoleSpec d;
  d.length = length;
  d.radius = radius;
  d.segments = segments;
  add_dipole(g, d);
  return WireMesh(g);
}

// Parallel x-directed dipoles spaced along y.
inline WireGeometry dipole_row(int count, double spacing, double length, int segments,
                               double height = 0.0) {
  WireGeometry g;
  for (int k = 0; k < count; ++k) {
    DipoleSpec d;
    d.axis = Vec3::UnitX();
    d.center = Vec3(0, k * spacing, height);
    d.length = length;
    d.radius = length / 470.0;
    d.segments = segments;
    d.element_id = k + 1;
    add_dipole(g, d);
  }
  if (height > 0.0) g.ground = GroundPlane{0.0};
  return g;
}

struct Array {
  std::shared_ptr<WireMesh> mesh;
  ImpedanceMatrix z;
  ArrayModel model;
};

// Measured-element model of every element of `g`; n_modes <= 0 keeps all.
inline Array build_array(const WireGeometry& g, int n_modes, double zref = 50.0) {
  Array a;
  a.mesh = std::make_shared<WireMesh>(g);
  a.z = assemble_impedance(*a.mesh, kF);
  for (int id : a.mesh->element_ids()) {
    const WireMesh em = a.mesh->element_mesh(id);
    const ImpedanceMatrix zk = extract_block(a.z, id, id);
    const int n = n_modes > 0 ? n_modes : em.basis_count();
    a.model.bases.push_back(compute_characteristic_modes(zk, n, em));
    a.model.elements.push_back(measured_element_gsm(a.model.bases.back(), zk, em.port_basis(), zref));
  }
  a.model.coupling = assemble_coupling(a.model.bases, a.z);
  return a;
}

inline VectorXcd stack(const std::vector<VectorXcd>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  VectorXcd out(n);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.segment(off, p.size()) = p;
    off += p.size();
  }
  return out;
}

// Characteristic bases and coupling of the builtin crossed-dipole grid.
struct Grid {
  std::shared_ptr<WireMesh> mesh;
  ImpedanceMatrix z;
  std::vector<CharacteristicBasis> bases;
  ModalCouplingMatrix g;
};

inline Grid crossed_grid(const BuiltinLayout& layout = builtin_defaults("grid3x3-crossed")) {
  Grid out;
  out.mesh = std::make_shared<WireMesh>(builtin_geometry(layout, kF));
  out.z = assemble_impedance(*out.mesh, kF);
  for (int id : out.mesh->element_ids()) {
    out.bases.push_back(
        compute_characteristic_modes(extract_block(out.z, id, id), 2, out.mesh->element_mesh(id)));
  }
  out.g = assemble_coupling(out.bases, out.z);
  return out;
}

}  // namespace fixtures
