#pragma once

// Characteristic modes of one element: Im{Z} I = lambda Re{Z} I with
// I^T Re{Z} I = 1. Modes are sorted by |lambda| ascending.

#include "cmsynth/common.hpp"
#include "cmsynth/mom_kernel.hpp"

#include <memory>
#include <string>

namespace cmsynth {

struct CharacteristicBasis {
  MatrixXd eigencurrents;  // basis functions x modes
  VectorXd eigenvalues;
  int element_id = 0;
  double frequency_hz = 0.0;
  // Diagonal shift applied to Re{Z} before factoring (0 when not needed).
  double regularization = 0.0;
  double min_real_eigenvalue = 0.0;
  // Element mesh used for mode far fields; may be empty for matrix-only input.
  std::shared_ptr<const WireMesh> mesh;

  int mode_count() const { return static_cast<int>(eigenvalues.size()); }
  int basis_count() const { return static_cast<int>(eigencurrents.rows()); }
};

CharacteristicBasis compute_characteristic_modes(const ImpedanceMatrix& z0,
                                                 int n_modes);
// Attaches the element mesh so mode far fields are available.
CharacteristicBasis compute_characteristic_modes(const ImpedanceMatrix& z0,
                                                 int n_modes,
                                                 const WireMesh& element_mesh);

FarFieldCut mode_farfield(const CharacteristicBasis& basis, int mode,
                          const CutSpec& cut);
FarFieldSample mode_farfield(const CharacteristicBasis& basis, int mode,
                             double theta, double phi);

// Text matrix of eigencurrents plus a JSON sidecar with the eigenvalues.
void save_basis(const CharacteristicBasis& basis, const std::string& matrix_path,
                const std::string& sidecar_path);
CharacteristicBasis load_basis(const std::string& matrix_path,
                               const std::string& sidecar_path);
std::string basis_sidecar_json(const CharacteristicBasis& basis);

}  // namespace cmsynth
