#include "cmsynth/modal_core.hpp"

#include "cmsynth/matrix_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cmsynth {

namespace {

using json = nlohmann::json;

constexpr double kSymmetryTol = 1e-8;
constexpr double kPsdTol = 1e-9;
constexpr double kClusterTol = 1e-8;
// Looser grouping used only to decide which modes are refined together.
constexpr double kRefineGroupTol = 1e-3;
constexpr int kRefineSteps = 3;

struct Mode {
  VectorXd current;
  double lambda = 0.0;
  int pivot = 0;
};

int first_largest_entry(const VectorXd& v) {
  const double peak = v.cwiseAbs().maxCoeff();
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) >= (1.0 - 1e-9) * peak) return i;
  }
  return 0;
}

// Replace a (near-)degenerate group by a canonical basis of its span:
// reduce on pivot rows chosen by column-pivoted QR, then orthonormalize in
// the Re{Z} metric in pivot order.
void canonicalize(std::vector<Mode>& group, const MatrixXd& r) {
  const int m = static_cast<int>(group.size());
  const int n = static_cast<int>(group.front().current.size());
  MatrixXd v(n, m);
  for (int j = 0; j < m; ++j) v.col(j) = group[j].current;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(v.transpose());
  const auto& perm = qr.colsPermutation().indices();
  std::vector<int> piv(perm.data(), perm.data() + m);
  std::sort(piv.begin(), piv.end());
  const MatrixXd w = v * v(piv, Eigen::all).inverse();
  std::vector<Mode> out(m);
  for (int j = 0; j < m; ++j) {
    VectorXd x = w.col(j);
    for (int i = 0; i < j; ++i) {
      x -= out[i].current.dot(r * x) * out[i].current;
    }
    x /= std::sqrt(x.dot(r * x));
    out[j].current = x;
    out[j].pivot = piv[j];
  }
  // Eigenvalues are recomputed from the final vectors by the caller.
  for (int j = 0; j < m; ++j) out[j].lambda = group[j].lambda;
  group = std::move(out);
}

// The reduced standard problem loses absolute accuracy ~eps*|lambda_max|
// when Re{Z} is nearly singular. Shifted block inverse iteration on the
// original pencil followed by Rayleigh-Ritz restores the small eigenvalues.
void refine(std::vector<Mode>& group, const MatrixXd& x, const MatrixXd& r) {
  const int m = static_cast<int>(group.size());
  const Eigen::Index n = x.rows();
  double sigma = 0.0;
  for (const auto& g : group) sigma += g.lambda;
  sigma /= m;
  sigma += 1e-9 * std::max(1.0, std::abs(sigma));
  Eigen::PartialPivLU<MatrixXd> lu(x - sigma * r);
  MatrixXd v(n, m);
  for (int j = 0; j < m; ++j) v.col(j) = group[j].current;
  for (int it = 0; it < kRefineSteps; ++it) {
    MatrixXd next = lu.solve(r * v);
    if (!next.allFinite()) return;
    Eigen::HouseholderQR<MatrixXd> qr(next);
    v = qr.householderQ() * MatrixXd::Identity(n, m);
  }
  MatrixXd a = v.transpose() * x * v;
  MatrixXd b = v.transpose() * r * v;
  a = 0.5 * (a + a.transpose());
  b = 0.5 * (b + b.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(a, b);
  if (ges.info() != Eigen::Success) return;
  const MatrixXd w = v * ges.eigenvectors();
  for (int j = 0; j < m; ++j) {
    group[j].current = w.col(j);
    group[j].lambda = ges.eigenvalues()[j];
  }
}

}  // namespace

CharacteristicBasis compute_characteristic_modes(const ImpedanceMatrix& z0,
                                                 int n_modes) {
  const MatrixXcd& z = z0.entries;
  const Eigen::Index dim = z.rows();
  if (dim == 0 || z.cols() != dim) {
    throw DimensionError("characteristic modes need a square impedance matrix");
  }
  if (n_modes < 1 || n_modes > dim) {
    throw DimensionError("mode count must lie in [1, " + std::to_string(dim) + "]");
  }
  const double zn = z.norm();
  if ((z - z.transpose()).norm() > kSymmetryTol * zn) {
    throw ConstraintError("impedance matrix is not symmetric");
  }
  const MatrixXd r = 0.5 * (z.real() + z.real().transpose());
  const MatrixXd x = 0.5 * (z.imag() + z.imag().transpose());

  Eigen::SelfAdjointEigenSolver<MatrixXd> rs(r, Eigen::EigenvaluesOnly);
  const double mu_min = rs.eigenvalues()[0];
  const double mu_max = rs.eigenvalues()[dim - 1];
  if (!(mu_max > 0.0) || mu_min < -kPsdTol * std::max(mu_max, 0.0)) {
    throw NumericalError("decomposition",
                         "real part of the impedance matrix is not positive "
                         "semi-definite",
                         mu_min);
  }
  // Shift so the factored matrix has smallest eigenvalue >= eps; rounding
  // can leave mu_min slightly negative on finely meshed wires.
  const double eps_base = 1e-12 * r.trace() / static_cast<double>(dim);
  const bool regularize = mu_min <= eps_base;
  const double eps = eps_base + std::max(0.0, -mu_min);
  MatrixXd rreg = r;
  if (regularize) rreg.diagonal().array() += eps;
  Eigen::LLT<MatrixXd> llt(rreg);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("decomposition",
                         "real part of the impedance matrix is singular beyond "
                         "the regularization threshold",
                         mu_min);
  }

  // L^-1 X L^-T y = lambda y, I = L^-T y.
  const auto& l = llt.matrixL();
  MatrixXd c = l.solve(x);
  c = l.solve(c.transpose()).eval();
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(c);
  const MatrixXd currents = llt.matrixU().solve(es.eigenvectors());

  auto by_lambda = [](const Mode& a, const Mode& b) {
    if (std::abs(a.lambda) != std::abs(b.lambda)) {
      return std::abs(a.lambda) < std::abs(b.lambda);
    }
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    return a.pivot < b.pivot;
  };
  std::vector<Mode> modes(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    modes[j].current = currents.col(j);
    modes[j].lambda = es.eigenvalues()[j];
    modes[j].pivot = first_largest_entry(modes[j].current);
  }
  std::stable_sort(modes.begin(), modes.end(), by_lambda);

  // Runs of (nearly) equal eigenvalue reaching into the retained set.
  auto for_each_run = [&](double rel_tol, auto&& fn) {
    std::size_t keep = 0;
    for (std::size_t i = 0; i < modes.size() && static_cast<int>(i) < n_modes;) {
      const double tol = rel_tol * std::max(1.0, std::abs(modes[i].lambda));
      std::size_t j = i + 1;
      while (j < modes.size() && std::abs(modes[j].lambda - modes[i].lambda) <= tol) ++j;
      std::vector<Mode> group(modes.begin() + i, modes.begin() + j);
      fn(group);
      std::copy(group.begin(), group.end(), modes.begin() + i);
      keep = j;
      i = j;
    }
    return keep;
  };
  // Every later step works on the real part that was factored, so modes in its
  // numerical null space stay orthogonal.
  const MatrixXd& rn = regularize ? rreg : r;
  const std::size_t refined = for_each_run(kRefineGroupTol, [&](std::vector<Mode>& g) {
    refine(g, x, rn);
    for (auto& mode : g) mode.pivot = first_largest_entry(mode.current);
  });
  std::stable_sort(modes.begin(), modes.begin() + refined, by_lambda);
  for_each_run(kClusterTol, [&](std::vector<Mode>& g) {
    if (g.size() > 1) canonicalize(g, rn);
  });

  CharacteristicBasis out;
  out.eigencurrents.resize(dim, n_modes);
  out.eigenvalues.resize(n_modes);
  for (int j = 0; j < n_modes; ++j) {
    VectorXd v = modes[j].current;
    const double p = v.dot(rn * v);
    if (!(p > 0.0)) {
      throw NumericalError("decomposition", "retained mode radiates no power", mu_min);
    }
    v /= std::sqrt(p);
    const double lam = v.dot(x * v);
    if (v[first_largest_entry(v)] < 0.0) v = -v;
    out.eigencurrents.col(j) = v;
    out.eigenvalues[j] = lam;
  }
  out.frequency_hz = z0.frequency_hz;
  out.element_id = z0.row_elements.empty() ? 0 : z0.row_elements.front();
  out.regularization = regularize ? eps : 0.0;
  out.min_real_eigenvalue = mu_min;
  return out;
}

CharacteristicBasis compute_characteristic_modes(const ImpedanceMatrix& z0,
                                                 int n_modes,
                                                 const WireMesh& element_mesh) {
  if (element_mesh.basis_count() != z0.entries.rows()) {
    throw DimensionError("element mesh does not match the impedance matrix");
  }
  CharacteristicBasis b = compute_characteristic_modes(z0, n_modes);
  b.mesh = std::make_shared<const WireMesh>(element_mesh);
  if (!element_mesh.element_ids().empty()) {
    b.element_id = element_mesh.element_ids().front();
  }
  return b;
}

namespace {

void check_mode(const CharacteristicBasis& basis, int mode) {
  if (mode < 0 || mode >= basis.mode_count()) {
    throw IndexError("mode index " + std::to_string(mode) + " out of range");
  }
  if (!basis.mesh) {
    throw ConfigError("characteristic basis carries no element mesh");
  }
}

}  // namespace

FarFieldCut mode_farfield(const CharacteristicBasis& basis, int mode,
                          const CutSpec& cut) {
  check_mode(basis, mode);
  const VectorXcd i = basis.eigencurrents.col(mode).cast<cd>();
  return radiate(i, *basis.mesh, basis.frequency_hz, cut,
                 "mode " + std::to_string(mode + 1));
}

FarFieldSample mode_farfield(const CharacteristicBasis& basis, int mode,
                             double theta, double phi) {
  check_mode(basis, mode);
  const VectorXcd i = basis.eigencurrents.col(mode).cast<cd>();
  return far_field(i, *basis.mesh, basis.frequency_hz, theta, phi);
}

std::string basis_sidecar_json(const CharacteristicBasis& basis) {
  json j;
  j["element_id"] = basis.element_id;
  j["frequency_hz"] = basis.frequency_hz;
  j["mode_count"] = basis.mode_count();
  j["basis_count"] = basis.basis_count();
  j["eigenvalues"] = std::vector<double>(basis.eigenvalues.data(),
                                         basis.eigenvalues.data() + basis.mode_count());
  j["ordering"] = "abs_lambda_ascending,signed_lambda,pivot_row";
  j["sign"] = "largest_entry_positive";
  j["normalization"] = "I^T Re(Z) I = 1";
  j["regularization"] = basis.regularization;
  j["min_real_eigenvalue"] = basis.min_real_eigenvalue;
  return j.dump(2) + "\n";
}

void save_basis(const CharacteristicBasis& basis, const std::string& matrix_path,
                const std::string& sidecar_path) {
  io::save_matrix(matrix_path, basis.eigencurrents.cast<cd>(), basis.frequency_hz);
  std::ofstream out(sidecar_path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + sidecar_path);
  out << basis_sidecar_json(basis);
}

CharacteristicBasis load_basis(const std::string& matrix_path,
                               const std::string& sidecar_path) {
  const auto m = io::load_matrix(matrix_path);
  std::ifstream in(sidecar_path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + sidecar_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("basis sidecar: ") + e.what());
  }
  CharacteristicBasis b;
  try {
    const auto lam = j.at("eigenvalues").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(lam.size()) != m.values.cols()) {
      throw FormatError("eigenvalue count differs from eigencurrent columns");
    }
    if (m.values.imag().cwiseAbs().maxCoeff() != 0.0) {
      throw FormatError("eigencurrents must be real");
    }
    b.eigencurrents = m.values.real();
    b.eigenvalues = Eigen::Map<const VectorXd>(lam.data(), static_cast<Eigen::Index>(lam.size()));
    b.element_id = j.at("element_id").get<int>();
    b.frequency_hz = j.at("frequency_hz").get<double>();
    b.regularization = j.value("regularization", 0.0);
    b.min_real_eigenvalue = j.value("min_real_eigenvalue", 0.0);
  } catch (const json::exception& e) {
    throw FormatError(std::string("basis sidecar: ") + e.what());
  }
  return b;
}

}  // namespace cmsynth
