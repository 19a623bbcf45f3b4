#include "cmsynth/coupling.hpp"

#include "cmsynth/matrix_io.hpp"

#include <json.hpp>

#include <numeric>

namespace cmsynth {

using json = nlohmann::json;

MatrixXcd ModalCouplingMatrix::block(int k, int l) const {
  if (k < 0 || l < 0 || k >= element_count || l >= element_count) {
    throw IndexError("coupling block index out of range");
  }
  auto it = blocks.find({k, l});
  if (it != blocks.end()) return it->second;
  return MatrixXcd::Zero(mode_counts[k], mode_counts[l]);
}

int ModalCouplingMatrix::total_modes() const {
  return std::accumulate(mode_counts.begin(), mode_counts.end(), 0);
}

int ModalCouplingMatrix::offset(int k) const {
  return std::accumulate(mode_counts.begin(), mode_counts.begin() + k, 0);
}

MatrixXcd ModalCouplingMatrix::dense() const {
  const int n = total_modes();
  MatrixXcd g = MatrixXcd::Zero(n, n);
  for (const auto& [kl, b] : blocks) {
    g.block(offset(kl.first), offset(kl.second), b.rows(), b.cols()) = b;
  }
  return g;
}

MatrixXcd coupling_block(const CharacteristicBasis& basis_k,
                         const CharacteristicBasis& basis_l,
                         const ImpedanceMatrix& z_kl) {
  if (z_kl.entries.rows() != basis_k.basis_count() ||
      z_kl.entries.cols() != basis_l.basis_count()) {
    throw DimensionError("impedance block does not match the two modal bases");
  }
  return 0.5 * basis_k.eigencurrents.transpose().cast<cd>() * z_kl.entries *
         basis_l.eigencurrents.cast<cd>();
}

ModalCouplingMatrix assemble_coupling(const std::vector<CharacteristicBasis>& bases,
                                      const ImpedanceMatrix& z) {
  ModalCouplingMatrix g;
  g.element_count = static_cast<int>(bases.size());
  for (const auto& b : bases) g.mode_counts.push_back(b.mode_count());
  int rows = 0;
  for (const auto& b : bases) rows += b.basis_count();
  if (rows != z.entries.rows()) {
    throw DimensionError("modal bases do not partition the array impedance matrix");
  }
  for (int k = 0; k < g.element_count; ++k) {
    for (int l = 0; l < g.element_count; ++l) {
      if (k == l) continue;
      const auto zkl = extract_block(z, bases[k].element_id, bases[l].element_id);
      g.blocks[{k, l}] = coupling_block(bases[k], bases[l], zkl);
    }
  }
  return g;
}

ModalCouplingMatrix zero_coupling(const std::vector<CharacteristicBasis>& bases) {
  ModalCouplingMatrix g;
  g.element_count = static_cast<int>(bases.size());
  for (const auto& b : bases) g.mode_counts.push_back(b.mode_count());
  return g;
}

VectorXcd external_incidence(const CharacteristicBasis& basis_k,
                             const PlaneWave& wave) {
  if (!basis_k.mesh) throw ConfigError("characteristic basis carries no element mesh");
  const VectorXcd v = plane_wave_excitation(*basis_k.mesh, basis_k.frequency_hz, wave);
  return -0.5 * basis_k.eigencurrents.transpose().cast<cd>() * v;
}

std::string coupling_to_json(const ModalCouplingMatrix& g) {
  json j;
  j["element_count"] = g.element_count;
  j["mode_counts"] = g.mode_counts;
  j["blocks"] = json::array();
  for (const auto& [kl, b] : g.blocks) {
    j["blocks"].push_back({{"k", kl.first}, {"l", kl.second},
                           {"matrix", io::format_matrix(b, 0.0)}});
  }
  return j.dump(2) + "\n";
}

ModalCouplingMatrix coupling_from_json(const std::string& text) {
  ModalCouplingMatrix g;
  try {
    const json j = json::parse(text);
    g.element_count = j.at("element_count").get<int>();
    g.mode_counts = j.at("mode_counts").get<std::vector<int>>();
    if (static_cast<int>(g.mode_counts.size()) != g.element_count) {
      throw FormatError("mode_counts length differs from element_count");
    }
    for (const auto& b : j.at("blocks")) {
      const int k = b.at("k").get<int>();
      const int l = b.at("l").get<int>();
      if (k == l || k < 0 || l < 0 || k >= g.element_count || l >= g.element_count) {
        throw FormatError("invalid coupling block index");
      }
      MatrixXcd m = io::parse_matrix(b.at("matrix").get<std::string>()).values;
      if (m.rows() != g.mode_counts[k] || m.cols() != g.mode_counts[l]) {
        throw FormatError("coupling block has the wrong shape");
      }
      g.blocks[{k, l}] = std::move(m);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("coupling: ") + e.what());
  }
  return g;
}

}  // namespace cmsynth
