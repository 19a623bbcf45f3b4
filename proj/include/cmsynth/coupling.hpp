#pragma once

// Modal coupling between elements, G^(k,l) = 1/2 I_CM^(k)T Z^(k,l) I_CM^(l),
// and incoming modal coefficients of an external plane wave.

#include "cmsynth/common.hpp"
#include "cmsynth/modal_core.hpp"
#include "cmsynth/mom_kernel.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cmsynth {

struct ModalCouplingMatrix {
  int element_count = 0;
  std::vector<int> mode_counts;
  // Keyed by 0-based element position (k, l), k != l.
  std::map<std::pair<int, int>, MatrixXcd> blocks;

  // Zero block for k == l.
  MatrixXcd block(int k, int l) const;
  // Stacked matrix over all modes with zero diagonal blocks.
  MatrixXcd dense() const;
  int total_modes() const;
  int offset(int k) const;
};

MatrixXcd coupling_block(const CharacteristicBasis& basis_k,
                         const CharacteristicBasis& basis_l,
                         const ImpedanceMatrix& z_kl);

// bases[k] must describe element bases[k].element_id of the array matrix z.
ModalCouplingMatrix assemble_coupling(const std::vector<CharacteristicBasis>& bases,
                                      const ImpedanceMatrix& z);

// Same structure, all blocks zero (coupling switched off).
ModalCouplingMatrix zero_coupling(const std::vector<CharacteristicBasis>& bases);

// a_n = -1/2 <J_n, E_inc> over the element.
VectorXcd external_incidence(const CharacteristicBasis& basis_k,
                             const PlaneWave& wave);

std::string coupling_to_json(const ModalCouplingMatrix& g);
ModalCouplingMatrix coupling_from_json(const std::string& text);

}  // namespace cmsynth
