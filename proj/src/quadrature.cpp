#include "cmsynth/quadrature.hpp"

#include "cmsynth/common.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

namespace cmsynth::quad {

namespace {

Rule build(int n) {
  // Nonnegative zeros of P_n; weights from 2 / ((1 - x^2) P_n'(x)^2).
  const auto zeros = boost::math::legendre_p_zeros<double>(n);
  std::vector<std::pair<double, double>> pts;
  for (double x : zeros) {
    const double dp = boost::math::legendre_p_prime<double>(n, x);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    pts.emplace_back(x, w);
    if (x != 0.0) pts.emplace_back(-x, w);
  }
  std::sort(pts.begin(), pts.end());
  Rule r;
  for (const auto& [x, w] : pts) {
    r.nodes.push_back(0.5 * (x + 1.0));
    r.weights.push_back(0.5 * w);
  }
  return r;
}

}  // namespace

const Rule& gauss_legendre(int order) {
  if (order < 1) {
    throw DimensionError("Gauss-Legendre order must be positive");
  }
  static std::mutex mu;
  static std::map<int, std::unique_ptr<Rule>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<Rule>(build(order));
  return *slot;
}

}  // namespace cmsynth::quad
