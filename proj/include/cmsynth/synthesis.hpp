#pragma once

// Iterative synthesis of synthetic two-mode elements: find T'^(k), S0'^(k)
// and real excitations v^(k) so every element's outgoing modal vector is
// q u under mutual coupling.

#include "cmsynth/array_solver.hpp"
#include "cmsynth/common.hpp"
#include "cmsynth/coupling.hpp"
#include "cmsynth/gsm.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cmsynth {

// Left/right circular modal targets for (mode 1, mode 2).
Eigen::Vector2cd target_left();
Eigen::Vector2cd target_right();
// Unit vector orthogonal to u, (-conj u2, conj u1).
Eigen::Vector2cd cross_target(const Eigen::Vector2cd& u);

enum class ScatterTerm {
  Outgoing,  // T'v = q (u - (S' - I) alpha), consistent with f = b - a
  Literal,   // T'v = q (u - S' alpha)
};

struct SynthesisConfig {
  Eigen::Vector2cd target = target_left();
  std::vector<cd> sigma;  // per element; empty means +j everywhere
  int max_iterations = 100;
  double threshold = 0.01;
  std::vector<Eigen::Vector2cd> initial_transmit;  // empty means target
  ScatterTerm scatter = ScatterTerm::Outgoing;

  void validate(int element_count) const;
  cd sigma_of(int k) const;
};

struct SynthesisState {
  std::vector<Eigen::Vector2cd> transmit;  // T'_tau
  std::vector<Eigen::Vector2cd> s0;        // S0' used for this step
  VectorXd v;
  double q = 0.0;
  double step_change = 0.0;  // sum_k || f_T,tau - f_T,tau-1 ||
};

struct SynthesisResult {
  std::vector<SyntheticElementParams> params;
  std::vector<Eigen::Vector2cd> transmit;
  VectorXd v;
  double q = 0.0;
  std::vector<SynthesisState> trace;
  bool converged = false;
  int iterations = 0;
  Eigen::Vector2cd target = target_left();
  std::vector<cd> sigma;
  double threshold = 0.01;

  // f_T^(k) = T'^(k) v^(k).
  std::vector<Eigen::Vector2cd> transmit_field() const;
};

// alpha^(k) = sum_{l != k} G^(k,l) u.
Eigen::Vector2cd incident_from_neighbors(const ModalCouplingMatrix& g,
                                         const Eigen::Vector2cd& target, int k);

SynthesisState iterate_step(const SynthesisState& previous,
                            const ModalCouplingMatrix& g,
                            const SynthesisConfig& config);

SynthesisState initial_state(int element_count, const SynthesisConfig& config);

SynthesisResult synthesize(const ModalCouplingMatrix& g, const SynthesisConfig& config);

// Array model of synthetic elements with the given transmit vectors.
ArrayModel synthetic_array(const std::vector<Eigen::Vector2cd>& transmit,
                           const std::vector<cd>& sigma,
                           const ModalCouplingMatrix& g,
                           const std::vector<CharacteristicBasis>& bases);

struct XprReport {
  double modal_initial_db = 0.0;  // co/cross modal power over the array
  double modal_final_db = 0.0;
  double field_initial_db = 0.0;  // over the cut, if bases carry meshes
  double field_final_db = 0.0;
  bool has_field = false;
  std::vector<double> plugback_error;  // ||f^(k) - q u|| / q
  VectorXcd f_initial;
  VectorXcd f_final;
};

// Initial configuration: T' = u, S0' from it, v = 1/sqrt(K).
XprReport evaluate_result(const SynthesisResult& result, const ModalCouplingMatrix& g,
                          const std::vector<CharacteristicBasis>& bases,
                          const std::optional<CutSpec>& cut,
                          double theta_min = -1e300, double theta_max = 1e300);

// Co/cross modal power ratio of stacked two-mode coefficients, dB.
double modal_xpr_db(const VectorXcd& f, const Eigen::Vector2cd& target);

std::string synthesis_to_json(const SynthesisResult& r);
SynthesisResult synthesis_from_json(const std::string& text);

}  // namespace cmsynth
