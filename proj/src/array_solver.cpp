#include "cmsynth/array_solver.hpp"

#include "cmsynth/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cmsynth {

int ArrayModel::total_modes() const {
  int n = 0;
  for (const auto& e : elements) n += e.mode_count();
  return n;
}

int ArrayModel::total_ports() const {
  int p = 0;
  for (const auto& e : elements) p += e.port_count();
  return p;
}

void ArrayModel::validate() const {
  const auto k = static_cast<int>(elements.size());
  if (k == 0) throw ConfigError("array model has no elements");
  if (coupling.element_count != k) {
    throw DimensionError("coupling matrix and element list differ in size");
  }
  for (int i = 0; i < k; ++i) {
    const auto& e = elements[i];
    const int n = e.mode_count();
    const int p = e.port_count();
    if (e.S.cols() != n || e.T.rows() != n || e.R.rows() != p || e.R.cols() != n ||
        e.Gamma.rows() != p || e.Gamma.cols() != p) {
      throw DimensionError("element " + std::to_string(i) + " has inconsistent GSM blocks");
    }
    if (coupling.mode_counts[i] != n) {
      throw DimensionError("element " + std::to_string(i) +
                           " mode count differs from the coupling matrix");
    }
    if (!bases.empty() && bases[i].mode_count() != n) {
      throw DimensionError("element " + std::to_string(i) +
                           " mode count differs from its modal basis");
    }
  }
  if (!bases.empty() && static_cast<int>(bases.size()) != k) {
    throw DimensionError("modal bases and element list differ in size");
  }
}

StackedGsm stack_isolated(const ArrayModel& model) {
  model.validate();
  const int n = model.total_modes();
  const int p = model.total_ports();
  StackedGsm s;
  s.S = MatrixXcd::Zero(n, n);
  s.T = MatrixXcd::Zero(n, p);
  s.R = MatrixXcd::Zero(p, n);
  s.Gamma = MatrixXcd::Zero(p, p);
  int on = 0, op = 0;
  for (const auto& e : model.elements) {
    const int en = e.mode_count(), ep = e.port_count();
    s.S.block(on, on, en, en) = e.S;
    s.T.block(on, op, en, ep) = e.T;
    s.R.block(op, on, ep, en) = e.R;
    s.Gamma.block(op, op, ep, ep) = e.Gamma;
    on += en;
    op += ep;
  }
  return s;
}

namespace {

struct Factored {
  StackedGsm iso;
  MatrixXcd g;
  MatrixXcd s_minus_i;
  Eigen::PartialPivLU<MatrixXcd> lu;
  double rcond = 0.0;
};

Factored factor(const ArrayModel& model) {
  Factored f;
  f.iso = stack_isolated(model);
  f.g = model.coupling.dense();
  const auto n = f.iso.S.rows();
  f.s_minus_i = f.iso.S - MatrixXcd::Identity(n, n);
  const MatrixXcd a = MatrixXcd::Identity(n, n) - f.s_minus_i * f.g;
  f.lu.compute(a);
  f.rcond = f.lu.rcond();
  if (!(f.rcond > 1e-14)) {
    throw NumericalError("resonance", "coupled system I - (S - I) G is singular", f.rcond);
  }
  return f;
}

double rel(const VectorXcd& r, const VectorXcd& ref) {
  const double d = ref.norm();
  return d > 0.0 ? r.norm() / d : r.norm();
}

}  // namespace

CoupledBlocks couple(const ArrayModel& model) {
  const Factored f = factor(model);
  const auto n = f.iso.S.rows();
  CoupledBlocks c;
  c.rcond = f.rcond;
  c.T = f.lu.solve(f.iso.T);
  const MatrixXcd m_si = f.lu.solve(f.s_minus_i);
  c.S = m_si + MatrixXcd::Identity(n, n);
  const MatrixXcd rg = f.iso.R * f.g;
  c.Gamma = f.iso.Gamma + rg * c.T;
  c.R = f.iso.R + rg * m_si;
  return c;
}

CoupledSolution solve_excitation(const ArrayModel& model, const VectorXcd& v,
                                 const VectorXcd& a_ext) {
  const Factored fa = factor(model);
  if (v.size() != fa.iso.T.cols() || a_ext.size() != fa.iso.S.rows()) {
    throw DimensionError("drive or external coefficient vector has the wrong length");
  }
  CoupledSolution s;
  s.v = v;
  s.a_ext = a_ext;
  const VectorXcd rhs = fa.iso.T * v + fa.s_minus_i * a_ext;
  s.f = fa.lu.solve(rhs);
  const VectorXcd a = a_ext + fa.g * s.f;
  s.w = fa.iso.Gamma * v + fa.iso.R * a;
  s.modal_residual = rel(s.f - (fa.s_minus_i * a + fa.iso.T * v), s.f);
  s.blocks = couple(model);
  s.port_residual = rel(s.w - (s.blocks.Gamma * v + s.blocks.R * a_ext), s.w);
  return s;
}

IterativeResult solve_iterative(const ArrayModel& model, const VectorXcd& v,
                                const VectorXcd& a_ext, double tol, int max_iter) {
  const StackedGsm iso = stack_isolated(model);
  const MatrixXcd g = model.coupling.dense();
  const auto n = iso.S.rows();
  const MatrixXcd sm = iso.S - MatrixXcd::Identity(n, n);
  const VectorXcd base = iso.T * v + sm * a_ext;
  const MatrixXcd step = sm * g;
  IterativeResult r;
  r.f = base;
  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    const VectorXcd next = base + step * r.f;
    r.last_change = rel(next - r.f, next);
    r.f = next;
    if (r.last_change < tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

double coupling_spectral_radius(const ArrayModel& model) {
  const StackedGsm iso = stack_isolated(model);
  const auto n = iso.S.rows();
  const MatrixXcd m = (iso.S - MatrixXcd::Identity(n, n)) * model.coupling.dense();
  Eigen::ComplexEigenSolver<MatrixXcd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<VectorXcd> element_currents(const VectorXcd& f,
                                        const std::vector<CharacteristicBasis>& bases) {
  std::vector<VectorXcd> out;
  int off = 0;
  for (const auto& b : bases) {
    if (off + b.mode_count() > f.size()) {
      throw DimensionError("modal coefficient vector is too short");
    }
    out.push_back(b.eigencurrents.cast<cd>() * f.segment(off, b.mode_count()));
    off += b.mode_count();
  }
  if (off != f.size()) throw DimensionError("modal coefficient vector is too long");
  return out;
}

FarFieldCut array_farfield(const VectorXcd& f,
                           const std::vector<CharacteristicBasis>& bases,
                           const CutSpec& cut, std::string label) {
  FarFieldCut out;
  out.phi_deg = cut.phi_deg;
  out.theta_deg = cut.theta_deg;
  out.label = std::move(label);
  out.e_theta.assign(cut.theta_deg.size(), 0.0);
  out.e_phi.assign(cut.theta_deg.size(), 0.0);
  int off = 0;
  for (const auto& b : bases) {
    out.frequency_hz = b.frequency_hz;
    for (int n = 0; n < b.mode_count(); ++n, ++off) {
      if (off >= f.size()) throw DimensionError("modal coefficient vector is too short");
      if (f[off] == 0.0) continue;
      const FarFieldCut m = mode_farfield(b, n, cut);
      for (std::size_t i = 0; i < cut.theta_deg.size(); ++i) {
        out.e_theta[i] += f[off] * m.e_theta[i];
        out.e_phi[i] += f[off] * m.e_phi[i];
      }
    }
  }
  if (off != f.size()) throw DimensionError("modal coefficient vector is too long");
  return out;
}

DirectSolution direct_solve_oracle(const WireMesh& mesh, const ImpedanceMatrix& z,
                                   const VectorXcd& v, double zref) {
  DirectSolution d;
  d.ports = port_drive_solve(z, mesh.port_basis(), v, zref);
  for (int id : mesh.element_ids()) {
    const auto [first, count] = mesh.element_basis_range(id);
    d.element_currents.push_back(d.ports.currents.segment(first, count));
  }
  return d;
}

DirectSolution direct_solve_oracle(const WireMesh& mesh, double frequency_hz,
                                   const VectorXcd& v, double zref) {
  return direct_solve_oracle(mesh, assemble_impedance(mesh, frequency_hz), v, zref);
}

double ratio_db(double co_power, double cross_power) {
  if (cross_power <= 0.0) return kXprCapDb;
  if (co_power <= 0.0) return -kXprCapDb;
  return std::clamp(10.0 * std::log10(co_power / cross_power), -kXprCapDb, kXprCapDb);
}

CircularCut circular_components(const FarFieldCut& cut, Handedness co,
                                double theta_min, double theta_max) {
  CircularCut c;
  c.theta_deg = cut.theta_deg;
  const double r2 = std::sqrt(2.0);
  double max_co = 0.0, max_cross = 0.0;
  for (std::size_t i = 0; i < cut.theta_deg.size(); ++i) {
    const cd l = (cut.e_theta[i] + kJ * cut.e_phi[i]) / r2;
    const cd r = (cut.e_theta[i] - kJ * cut.e_phi[i]) / r2;
    c.e_left.push_back(l);
    c.e_right.push_back(r);
    if (cut.theta_deg[i] < theta_min || cut.theta_deg[i] > theta_max) continue;
    const double pl = std::norm(l), pr = std::norm(r);
    max_co = std::max(max_co, co == Handedness::Left ? pl : pr);
    max_cross = std::max(max_cross, co == Handedness::Left ? pr : pl);
  }
  c.xpr_db = ratio_db(max_co, max_cross);
  return c;
}

std::string cut_to_csv(const FarFieldCut& cut) {
  const CircularCut c = circular_components(cut);
  auto db = [](cd x) { return std::max(20.0 * std::log10(std::abs(x)), -300.0); };
  std::ostringstream out;
  out << "theta_deg,re_e_theta,im_e_theta,re_e_phi,im_e_phi,e_left_db,e_right_db\n";
  for (std::size_t i = 0; i < cut.theta_deg.size(); ++i) {
    out << io::format_double(cut.theta_deg[i]) << ','
        << io::format_double(cut.e_theta[i].real()) << ','
        << io::format_double(cut.e_theta[i].imag()) << ','
        << io::format_double(cut.e_phi[i].real()) << ','
        << io::format_double(cut.e_phi[i].imag()) << ','
        << io::format_double(db(c.e_left[i])) << ','
        << io::format_double(db(c.e_right[i])) << '\n';
  }
  return out.str();
}

}  // namespace cmsynth
