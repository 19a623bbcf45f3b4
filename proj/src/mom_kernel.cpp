#include "cmsynth/mom_kernel.hpp"

#include "cmsynth/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

namespace cmsynth {

namespace {

constexpr int kRise = 0;
constexpr int kFall = 1;
constexpr int kSmoothOrder = 10;  // per-segment rule for smooth kernels
constexpr int kPanelOrder = 10;   // graded outer panels and inner remainders
constexpr double kNearFactor = 1.5;

// Node connectivity tolerance relative to the shorter segment.
constexpr double kJoinTol = 1e-9;

double seg_length(const Segment& s) { return (s.end - s.start).norm(); }

void validate(const WireGeometry& g) {
  if (g.segments.empty()) throw GeometryError("geometry has no segments");
  for (std::size_t i = 0; i < g.segments.size(); ++i) {
    const auto& s = g.segments[i];
    const double d = seg_length(s);
    if (!std::isfinite(d) || d <= 0.0) {
      throw GeometryError("segment " + std::to_string(i) + " has zero length");
    }
    if (!(s.radius > 0.0) || s.radius >= d) {
      throw GeometryError("segment " + std::to_string(i) +
                          " violates 0 < radius < length");
    }
    if (i > 0 && s.element_id < g.segments[i - 1].element_id) {
      throw GeometryError("segments must be grouped by nondecreasing element id");
    }
    if (g.ground && (s.start.z() <= g.ground->height ||
                     s.end.z() <= g.ground->height)) {
      throw GeometryError("segment " + std::to_string(i) +
                          " touches or crosses the ground plane");
    }
  }
  for (std::size_t i = 1; i < g.ports.size(); ++i) {
    if (g.ports[i].element_id < g.ports[i - 1].element_id) {
      throw GeometryError("ports must be listed in nondecreasing element order");
    }
  }
}

Vec3 mirror(const Vec3& r, double h) { return Vec3(r.x(), r.y(), 2.0 * h - r.z()); }

// Precomputed per-segment data at one frequency.
struct SegData {
  Vec3 r0;
  Vec3 t;
  double d = 0.0;
  double a = 0.0;
  double sn = 0.0;  // sin(k d)
  double cs = 0.0;  // cos(k d)
  std::array<Vec3, kSmoothOrder> x;
  std::array<double, kSmoothOrder> w;
  std::array<std::array<double, kSmoothOrder>, 2> f;
  std::array<std::array<double, kSmoothOrder>, 2> df;
};

void half_value(const SegData& s, double k, int half, double l, double& f,
                double& df) {
  if (half == kRise) {
    f = std::sin(k * l) / s.sn;
    df = k * std::cos(k * l) / s.sn;
  } else {
    f = std::sin(k * (s.d - l)) / s.sn;
    df = -k * std::cos(k * (s.d - l)) / s.sn;
  }
}

SegData make_seg(const Vec3& start, const Vec3& end, double radius, double k) {
  SegData s;
  s.r0 = start;
  s.d = (end - start).norm();
  s.t = (end - start) / s.d;
  s.a = radius;
  s.sn = std::sin(k * s.d);
  s.cs = std::cos(k * s.d);
  const auto& rule = quad::gauss_legendre(kSmoothOrder);
  for (int i = 0; i < kSmoothOrder; ++i) {
    const double l = rule.nodes[i] * s.d;
    s.x[i] = s.r0 + l * s.t;
    s.w[i] = rule.weights[i] * s.d;
    for (int h = 0; h < 2; ++h) half_value(s, k, h, l, s.f[h][i], s.df[h][i]);
  }
  return s;
}

SegData mirrored(const SegData& s, double h) {
  SegData m = s;
  m.r0 = mirror(s.r0, h);
  m.t = Vec3(s.t.x(), s.t.y(), -s.t.z());
  for (int i = 0; i < kSmoothOrder; ++i) m.x[i] = mirror(s.x[i], h);
  return m;
}

using Pair = Eigen::Matrix2cd;

// Outer graded panel nodes on [0, d], refined geometrically toward both ends.
std::vector<std::pair<double, double>> graded_nodes(double d, double a) {
  std::vector<double> left{0.0};
  for (double g = a; g < 0.5 * d; g *= 4.0) left.push_back(g);
  std::vector<double> bps = left;
  bps.push_back(0.5 * d);
  for (auto it = left.rbegin(); it != left.rend(); ++it) bps.push_back(d - *it);
  const auto& rule = quad::gauss_legendre(kPanelOrder);
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
    const double lo = bps[i];
    const double len = bps[i + 1] - lo;
    for (int j = 0; j < kPanelOrder; ++j) {
      out.emplace_back(lo + rule.nodes[j] * len, rule.weights[j] * len);
    }
  }
  return out;
}

class Assembler {
 public:
  Assembler(const WireMesh& mesh, double frequency_hz)
      : mesh_(mesh), k_(wavenumber(frequency_hz)) {
    const auto& g = mesh.geometry();
    const double lam = wavelength(frequency_hz);
    for (std::size_t i = 0; i < g.segments.size(); ++i) {
      const auto& s = g.segments[i];
      if (seg_length(s) > 0.4 * lam) {
        throw GeometryError("segment " + std::to_string(i) +
                            " longer than 0.4 wavelength");
      }
      segs_.push_back(make_seg(s.start, s.end, s.radius, k_));
      if (g.ground) images_.push_back(mirrored(segs_.back(), g.ground->height));
    }
    outer_.resize(segs_.size());
    for (std::size_t i = 0; i < segs_.size(); ++i) {
      outer_[i] = graded_nodes(segs_[i].d, segs_[i].a);
    }
  }

  // 2x2 interaction (p half, q half) between segment p and source q.
  Pair pair(int p, const SegData& q) const {
    const SegData& sp = segs_[p];
    const double tt = sp.t.dot(q.t);
    Pair m = Pair::Zero();
    const bool near = is_near(sp, q);
    for (int i = 0; i < kSmoothOrder; ++i) {
      for (int j = 0; j < kSmoothOrder; ++j) {
        const double dist = (sp.x[i] - q.x[j]).norm();
        const double kd = k_ * dist;
        const double re_kernel = dist > 0.0 ? std::sin(kd) / dist : k_;
        double im_kernel = 0.0;
        if (!near) {
          const double r = std::sqrt(dist * dist + q.a * q.a);
          im_kernel = std::cos(k_ * r) / r;
        }
        const double ww = sp.w[i] * q.w[j];
        for (int hp = 0; hp < 2; ++hp) {
          for (int hq = 0; hq < 2; ++hq) {
            const double form = k_ * tt * sp.f[hp][i] * q.f[hq][j] -
                                sp.df[hp][i] * q.df[hq][j] / k_;
            m(hp, hq) += cd(ww * form * re_kernel, ww * form * im_kernel);
          }
        }
      }
    }
    if (near) {
      const Eigen::Matrix2d im = near_reactive(p, q);
      m += cd(0.0, 1.0) * im.cast<cd>();
    }
    return m * (kEta0 / (4.0 * kPi));
  }

  MatrixXcd assemble() const {
    const auto& basis = mesh_.basis();
    const int ns = static_cast<int>(segs_.size());
    std::vector<std::array<int, 2>> owner(ns, {-1, -1});
    for (int b = 0; b < static_cast<int>(basis.size()); ++b) {
      owner[basis[b].rise_segment][kRise] = b;
      owner[basis[b].fall_segment][kFall] = b;
    }
    const int n = mesh_.basis_count();
    MatrixXcd z = MatrixXcd::Zero(n, n);
    for (int p = 0; p < ns; ++p) {
      if (owner[p][0] < 0 && owner[p][1] < 0) continue;
      for (int q = p; q < ns; ++q) {
        if (owner[q][0] < 0 && owner[q][1] < 0) continue;
        Pair m = pair(p, segs_[q]);
        // Image currents carry coefficient -1 with mirrored endpoints.
        if (!images_.empty()) m -= pair(p, images_[q]);
        if (p == q) m = (0.5 * (m + m.transpose())).eval();
        for (int hp = 0; hp < 2; ++hp) {
          const int bm = owner[p][hp];
          if (bm < 0) continue;
          for (int hq = 0; hq < 2; ++hq) {
            const int bn = owner[q][hq];
            if (bn < 0) continue;
            z(bm, bn) += m(hp, hq);
            if (p != q) z(bn, bm) += m(hp, hq);
          }
        }
      }
    }
    return z;
  }

 private:
  bool is_near(const SegData& p, const SegData& q) const {
    const Vec3 mp = p.r0 + 0.5 * p.d * p.t;
    const Vec3 mq = q.r0 + 0.5 * q.d * q.t;
    const double gap = (mp - mq).norm() - 0.5 * (p.d + q.d);
    return gap < kNearFactor * std::max(p.d, q.d);
  }

  // Reactive part (cos(kR)/R kernel) for close segment pairs. The inner
  // integral treats the 1/R part in closed form after expanding the source
  // sinusoid about the observation point's foot; the rest is smooth.
  Eigen::Matrix2d near_reactive(int p, const SegData& q) const {
    const SegData& sp = segs_[p];
    const double tt = sp.t.dot(q.t);
    const auto& rule = quad::gauss_legendre(kPanelOrder);
    const double k = k_;
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    for (const auto& [l, wl] : outer_[p]) {
      const Vec3 x = sp.r0 + l * sp.t;
      const Vec3 rel = x - q.r0;
      const double l0 = rel.dot(q.t);
      const double rho2 = std::max(0.0, rel.squaredNorm() - l0 * l0);
      const double b2 = rho2 + q.a * q.a;
      const double b = std::sqrt(b2);
      const double up = q.d - l0;
      const double sa = std::sqrt(up * up + b2);
      const double sb = std::sqrt(l0 * l0 + b2);
      const double a0 = std::asinh(up / b) + std::asinh(l0 / b);
      const double a1 = q.d * (q.d - 2.0 * l0) / (sa + sb);
      double e1 = 0.0, e2 = 0.0, rem_s = 0.0, rem_c = 0.0;
      const double split = std::clamp(l0, 0.0, q.d);
      for (const auto& [lo, hi] : {std::pair{0.0, split}, std::pair{split, q.d}}) {
        const double len = hi - lo;
        if (len <= 0.0) continue;
        for (int j = 0; j < kPanelOrder; ++j) {
          const double lq = lo + rule.nodes[j] * len;
          const double w = rule.weights[j] * len;
          const double u = lq - l0;
          const double r = std::sqrt(u * u + b2);
          const double su = std::sin(0.5 * k * u);
          e1 += w * (-2.0 * su * su) / r;
          e2 += w * (std::sin(k * u) - k * u) / r;
          const double sr = std::sin(0.5 * k * r);
          const double tail = w * (-2.0 * sr * sr) / r;
          rem_s += tail * std::sin(k * lq);
          rem_c += tail * std::cos(k * lq);
        }
      }
      const double s0 = std::sin(k * l0), c0 = std::cos(k * l0);
      const double is = s0 * (a0 + e1) + c0 * (k * a1 + e2) + rem_s;
      const double ic = c0 * (a0 + e1) - s0 * (k * a1 + e2) + rem_c;
      // Source-side integrals of f and f' for both halves of q.
      const double jf[2] = {is / q.sn, (q.sn * ic - q.cs * is) / q.sn};
      const double jd[2] = {k * ic / q.sn, -k * (q.cs * ic + q.sn * is) / q.sn};
      for (int hp = 0; hp < 2; ++hp) {
        double f, df;
        half_value(sp, k, hp, l, f, df);
        for (int hq = 0; hq < 2; ++hq) {
          m(hp, hq) += wl * (k * tt * f * jf[hq] - df * jd[hq] / k);
        }
      }
    }
    return m;
  }

  const WireMesh& mesh_;
  double k_;
  std::vector<SegData> segs_;
  std::vector<SegData> images_;
  std::vector<std::vector<std::pair<double, double>>> outer_;
};

// Integral over [0, d] of a half basis times exp(j beta l).
cd half_phase_integral(const SegData& s, double k, int half, double beta) {
  const double denom = k * k - beta * beta;
  if (std::abs(denom) < 1e-3 * k * k) {
    const auto& rule = quad::gauss_legendre(20);
    cd acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double l = rule.nodes[i] * s.d;
      double f, df;
      half_value(s, k, half, l, f, df);
      acc += rule.weights[i] * s.d * f * std::exp(kJ * (beta * l));
    }
    return acc;
  }
  const cd e = std::exp(kJ * (beta * s.d));
  cd v;
  if (half == kRise) {
    v = (e * (kJ * beta * s.sn - k * s.cs) + k) / denom;
  } else {
    v = ((-kJ * beta * s.sn - k * s.cs) + k * e) / denom;
  }
  return v / s.sn;
}

// Precomputed segment data for repeated far-field evaluation.
class Radiator {
 public:
  Radiator(const WireMesh& mesh, double frequency_hz)
      : mesh_(mesh), k_(wavenumber(frequency_hz)) {
    const auto& g = mesh.geometry();
    for (const auto& s : g.segments) {
      segs_.push_back(make_seg(s.start, s.end, s.radius, k_));
      if (g.ground) images_.push_back(mirrored(segs_.back(), g.ground->height));
    }
  }

  FarFieldSample sample(const VectorXcd& currents, double theta,
                        double phi) const {
    const double st = std::sin(theta), ct = std::cos(theta);
    const double sp = std::sin(phi), cp = std::cos(phi);
    const Vec3 kvec = k_ * Vec3(st * cp, st * sp, ct);
    const Vec3 th(ct * cp, ct * sp, -st);
    const Vec3 ph(-sp, cp, 0.0);
    Eigen::Vector3cd n = moment(currents, kvec, segs_);
    if (!images_.empty()) n -= moment(currents, kvec, images_);
    const cd scale = -kJ * k_ * kEta0 / (4.0 * kPi);
    return {scale * th.cast<cd>().dot(n), scale * ph.cast<cd>().dot(n)};
  }

 private:
  Eigen::Vector3cd moment(const VectorXcd& coef, const Vec3& kvec,
                          const std::vector<SegData>& segs) const {
    const auto& basis = mesh_.basis();
    Eigen::Vector3cd acc = Eigen::Vector3cd::Zero();
    for (int b = 0; b < static_cast<int>(basis.size()); ++b) {
      if (coef[b] == 0.0) continue;
      for (int half = 0; half < 2; ++half) {
        const SegData& sd =
            segs[half == kRise ? basis[b].rise_segment : basis[b].fall_segment];
        const cd ph = std::exp(kJ * kvec.dot(sd.r0));
        acc += (coef[b] * ph * half_phase_integral(sd, k_, half, kvec.dot(sd.t))) *
               sd.t.cast<cd>();
      }
    }
    return acc;
  }

  const WireMesh& mesh_;
  double k_;
  std::vector<SegData> segs_;
  std::vector<SegData> images_;
};

}  // namespace

// ---------------------------------------------------------------------------
// WireMesh

WireMesh::WireMesh(WireGeometry geometry) : geometry_(std::move(geometry)) {
  validate(geometry_);
  const auto& segs = geometry_.segments;
  std::set<int> ids;
  for (const auto& s : segs) ids.insert(s.element_id);
  element_ids_.assign(ids.begin(), ids.end());

  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    const auto& a = segs[i];
    const auto& b = segs[i + 1];
    if (a.element_id != b.element_id) continue;
    const double tol = kJoinTol * std::min(seg_length(a), seg_length(b));
    if ((a.end - b.start).norm() <= tol) {
      basis_.push_back({static_cast<int>(i), static_cast<int>(i + 1), a.element_id});
    }
  }

  std::map<int, int> first_segment;
  std::map<int, int> segment_count;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    first_segment.try_emplace(segs[i].element_id, static_cast<int>(i));
    ++segment_count[segs[i].element_id];
  }
  for (const auto& port : geometry_.ports) {
    auto it = first_segment.find(port.element_id);
    if (it == first_segment.end()) {
      throw GeometryError("port references unknown element " +
                          std::to_string(port.element_id));
    }
    if (port.segment < 0 || port.segment >= segment_count[port.element_id]) {
      throw GeometryError("port references missing segment " +
                          std::to_string(port.segment) + " of element " +
                          std::to_string(port.element_id));
    }
    const int global = it->second + port.segment;
    auto bit = std::find_if(basis_.begin(), basis_.end(), [&](const auto& bf) {
      return bf.rise_segment == global;
    });
    if (bit == basis_.end()) {
      throw GeometryError("port at segment " + std::to_string(port.segment) +
                          " of element " + std::to_string(port.element_id) +
                          " is not at an interior wire node");
    }
    port_basis_.push_back(static_cast<int>(bit - basis_.begin()));
  }
  for (std::size_t i = 0; i < port_basis_.size(); ++i) {
    for (std::size_t j = i + 1; j < port_basis_.size(); ++j) {
      if (port_basis_[i] == port_basis_[j]) {
        throw GeometryError("two ports share one feed node");
      }
    }
  }
}

std::vector<int> WireMesh::basis_elements() const {
  std::vector<int> out;
  out.reserve(basis_.size());
  for (const auto& b : basis_) out.push_back(b.element_id);
  return out;
}

std::pair<int, int> WireMesh::element_basis_range(int element_id) const {
  if (!std::binary_search(element_ids_.begin(), element_ids_.end(), element_id)) {
    throw IndexError("unknown element id " + std::to_string(element_id));
  }
  int first = -1, count = 0;
  for (int i = 0; i < basis_count(); ++i) {
    if (basis_[i].element_id != element_id) continue;
    if (first < 0) first = i;
    ++count;
  }
  return {first < 0 ? 0 : first, count};
}

std::vector<int> WireMesh::element_ports(int element_id) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < geometry_.ports.size(); ++i) {
    if (geometry_.ports[i].element_id == element_id) out.push_back(static_cast<int>(i));
  }
  return out;
}

WireMesh WireMesh::element_mesh(int element_id) const {
  if (!std::binary_search(element_ids_.begin(), element_ids_.end(), element_id)) {
    throw IndexError("unknown element id " + std::to_string(element_id));
  }
  WireGeometry g;
  g.ground = geometry_.ground;
  for (const auto& s : geometry_.segments) {
    if (s.element_id == element_id) g.segments.push_back(s);
  }
  for (const auto& p : geometry_.ports) {
    if (p.element_id == element_id) g.ports.push_back(p);
  }
  return WireMesh(std::move(g));
}

// ---------------------------------------------------------------------------
// Impedance

ImpedanceMatrix assemble_impedance(const WireMesh& mesh, double frequency_hz) {
  if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz)) {
    throw ConfigError("frequency must be positive");
  }
  Assembler assembler(mesh, frequency_hz);
  ImpedanceMatrix z;
  z.entries = assembler.assemble();
  z.frequency_hz = frequency_hz;
  z.row_elements = mesh.basis_elements();
  z.col_elements = z.row_elements;
  return z;
}

ImpedanceMatrix assemble_impedance(const WireGeometry& geometry,
                                   double frequency_hz,
                                   std::optional<GroundPlane> ground) {
  WireGeometry g = geometry;
  g.ground = ground;
  return assemble_impedance(WireMesh(std::move(g)), frequency_hz);
}

ImpedanceMatrix extract_block(const ImpedanceMatrix& z, int k, int l) {
  auto pick = [](const std::vector<int>& ids, int e) {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(ids.size()); ++i) {
      if (ids[i] == e) idx.push_back(i);
    }
    if (idx.empty()) throw IndexError("unknown element id " + std::to_string(e));
    return idx;
  };
  const auto rows = pick(z.row_elements, k);
  const auto cols = pick(z.col_elements, l);
  ImpedanceMatrix out;
  out.entries = z.entries(rows, cols);
  out.frequency_hz = z.frequency_hz;
  out.row_elements.assign(rows.size(), k);
  out.col_elements.assign(cols.size(), l);
  out.block_index = std::make_pair(k, l);
  return out;
}

// ---------------------------------------------------------------------------
// Ports

namespace {

Eigen::PartialPivLU<MatrixXcd> loaded_lu(const ImpedanceMatrix& z,
                                         const std::vector<int>& port_basis,
                                         double zref) {
  if (z.entries.rows() != z.entries.cols()) {
    throw DimensionError("port solve needs a square impedance matrix");
  }
  if (!(zref > 0.0)) throw ConfigError("reference impedance must be positive");
  MatrixXcd loaded = z.entries;
  for (int b : port_basis) {
    if (b < 0 || b >= loaded.rows()) throw IndexError("port basis out of range");
    loaded(b, b) += zref;
  }
  Eigen::PartialPivLU<MatrixXcd> lu(loaded);
  const double rc = lu.rcond();
  if (!(rc > 1e-14)) {
    throw NumericalError("solver", "loaded impedance matrix is singular", rc);
  }
  return lu;
}

}  // namespace

PortSolution port_drive_solve(const ImpedanceMatrix& z,
                              const std::vector<int>& port_basis,
                              const VectorXcd& incident, double zref) {
  if (incident.size() != static_cast<Eigen::Index>(port_basis.size())) {
    throw DimensionError("incident wave count differs from port count");
  }
  const auto lu = loaded_lu(z, port_basis, zref);
  const double sq = std::sqrt(zref);
  VectorXcd rhs = VectorXcd::Zero(z.entries.rows());
  for (std::size_t p = 0; p < port_basis.size(); ++p) {
    rhs[port_basis[p]] += 2.0 * sq * incident[p];
  }
  PortSolution s;
  s.currents = lu.solve(rhs);
  const auto np = static_cast<Eigen::Index>(port_basis.size());
  s.port_currents.resize(np);
  s.port_voltages.resize(np);
  s.reflected.resize(np);
  for (Eigen::Index p = 0; p < np; ++p) {
    const cd i = s.currents[port_basis[p]];
    s.port_currents[p] = i;
    s.port_voltages[p] = 2.0 * sq * incident[p] - zref * i;
    s.reflected[p] = incident[p] - sq * i;
  }
  return s;
}

MatrixXcd port_drive_columns(const ImpedanceMatrix& z,
                             const std::vector<int>& port_basis, double zref) {
  const auto lu = loaded_lu(z, port_basis, zref);
  MatrixXcd rhs = MatrixXcd::Zero(z.entries.rows(),
                                  static_cast<Eigen::Index>(port_basis.size()));
  for (std::size_t p = 0; p < port_basis.size(); ++p) {
    rhs(port_basis[p], static_cast<Eigen::Index>(p)) = 2.0 * std::sqrt(zref);
  }
  return lu.solve(rhs);
}

// ---------------------------------------------------------------------------
// Radiation

CutSpec CutSpec::uniform(double phi_deg, double theta_start, double theta_stop,
                         int count) {
  if (count < 2 || !(theta_stop > theta_start)) {
    throw ConfigError("cut needs at least two increasing theta samples");
  }
  CutSpec c;
  c.phi_deg = phi_deg;
  for (int i = 0; i < count; ++i) {
    c.theta_deg.push_back(theta_start +
                          (theta_stop - theta_start) * i / (count - 1));
  }
  return c;
}

FarFieldSample far_field(const VectorXcd& currents, const WireMesh& mesh,
                         double frequency_hz, double theta, double phi) {
  if (currents.size() != mesh.basis_count()) {
    throw DimensionError("current vector does not match basis count");
  }
  return Radiator(mesh, frequency_hz).sample(currents, theta, phi);
}

FarFieldCut radiate(const VectorXcd& currents, const WireMesh& mesh,
                    double frequency_hz, const CutSpec& cut, std::string label) {
  for (std::size_t i = 1; i < cut.theta_deg.size(); ++i) {
    if (!(cut.theta_deg[i] > cut.theta_deg[i - 1])) {
      throw ConfigError("cut theta samples must be strictly increasing");
    }
  }
  FarFieldCut out;
  out.phi_deg = cut.phi_deg;
  out.theta_deg = cut.theta_deg;
  out.frequency_hz = frequency_hz;
  out.label = std::move(label);
  if (currents.size() != mesh.basis_count()) {
    throw DimensionError("current vector does not match basis count");
  }
  const Radiator rad(mesh, frequency_hz);
  const double phi = cut.phi_deg * kPi / 180.0;
  for (double t : cut.theta_deg) {
    const auto s = rad.sample(currents, t * kPi / 180.0, phi);
    out.e_theta.push_back(s.e_theta);
    out.e_phi.push_back(s.e_phi);
  }
  return out;
}

double radiated_power(const VectorXcd& currents, const WireMesh& mesh,
                      double frequency_hz, int n_theta, int n_phi) {
  if (n_theta < 1 || n_phi < 1) throw ConfigError("sphere grid must be nonempty");
  if (currents.size() != mesh.basis_count()) {
    throw DimensionError("current vector does not match basis count");
  }
  const Radiator rad(mesh, frequency_hz);
  const double theta_max = mesh.geometry().ground ? 0.5 * kPi : kPi;
  const auto& rule = quad::gauss_legendre(n_theta);
  const double dphi = 2.0 * kPi / n_phi;
  double acc = 0.0;
  for (int i = 0; i < n_theta; ++i) {
    const double theta = rule.nodes[i] * theta_max;
    const double wt = rule.weights[i] * theta_max * std::sin(theta);
    for (int j = 0; j < n_phi; ++j) {
      const auto s = rad.sample(currents, theta, j * dphi);
      acc += wt * dphi * (std::norm(s.e_theta) + std::norm(s.e_phi));
    }
  }
  return acc / (2.0 * kEta0);
}

VectorXcd plane_wave_excitation(const WireMesh& mesh, double frequency_hz,
                                const PlaneWave& wave) {
  const double k = wavenumber(frequency_hz);
  const auto& g = mesh.geometry();
  const Vec3 kvec = -k * wave.direction.normalized();
  VectorXcd v = VectorXcd::Zero(mesh.basis_count());
  const auto& basis = mesh.basis();
  for (int b = 0; b < mesh.basis_count(); ++b) {
    for (int half = 0; half < 2; ++half) {
      const int si = half == kRise ? basis[b].rise_segment : basis[b].fall_segment;
      const auto& s = g.segments[si];
      const SegData sd = make_seg(s.start, s.end, s.radius, k);
      auto tested = [&](const SegData& x) {
        return x.t.cast<cd>().dot(wave.polarization) *
               std::exp(kJ * kvec.dot(x.r0)) *
               half_phase_integral(x, k, half, kvec.dot(x.t));
      };
      v[b] += tested(sd);
      if (g.ground) v[b] -= tested(mirrored(sd, g.ground->height));
    }
  }
  return wave.amplitude * v;
}

}  // namespace cmsynth
