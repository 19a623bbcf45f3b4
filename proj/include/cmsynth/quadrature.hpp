#pragma once

#include <vector>

namespace cmsynth::quad {

// Gauss-Legendre rule mapped to [0, 1].
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Any order >= 1; rules are built once and cached.
const Rule& gauss_legendre(int order);

}  // namespace cmsynth::quad
