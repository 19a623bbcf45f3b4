#include <doctest.h>

#include "fixtures.hpp"
#include "pws_oracle.hpp"

using namespace cmsynth;
using fixtures::kF;
using fixtures::lam;

namespace {

struct Row {
  std::shared_ptr<WireMesh> mesh;
  ImpedanceMatrix z;
  std::vector<CharacteristicBasis> bases;
};

Row row(int count, double spacing, int modes, int segments = 8) {
  Row r;
  r.mesh = std::make_shared<WireMesh>(fixtures::dipole_row(count, spacing, 0.47 * lam(), segments));
  r.z = assemble_impedance(*r.mesh, kF);
  for (int id : r.mesh->element_ids()) {
    const WireMesh em = r.mesh->element_mesh(id);
    const int n = modes > 0 ? modes : em.basis_count();
    r.bases.push_back(compute_characteristic_modes(extract_block(r.z, id, id), n, em));
  }
  return r;
}

// Far field sample of element currents towards (theta, phi).
Eigen::Vector3cd field_vector(const VectorXcd& i, const WireMesh& m, double theta, double phi) {
  const auto s = far_field(i, m, kF, theta, phi);
  const Vec3 th(std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi), -std::sin(theta));
  const Vec3 ph(-std::sin(phi), std::cos(phi), 0);
  return s.e_theta * th.cast<cd>() + s.e_phi * ph.cast<cd>();
}

Vec3 radial(double theta, double phi) {
  return Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
}

}  // namespace

TEST_CASE("zero impedance block gives zero coupling") {
  const auto r = row(2, 0.56 * lam(), 3);
  ImpedanceMatrix zero;
  zero.entries = MatrixXcd::Zero(r.bases[0].basis_count(), r.bases[1].basis_count());
  CHECK(coupling_block(r.bases[0], r.bases[1], zero).norm() == 0.0);
  ImpedanceMatrix wrong;
  wrong.entries = MatrixXcd::Zero(3, 3);
  CHECK_THROWS_AS(coupling_block(r.bases[0], r.bases[1], wrong), DimensionError);
}

TEST_CASE("coupling block matches the inner products by direct quadrature") {
  const auto r = row(2, 0.56 * lam(), 3, 6);
  const auto g = assemble_coupling(r.bases, r.z);
  const MatrixXcd z12 = pws_oracle::mutual_block(*r.mesh, 1, 2, kF);
  const MatrixXcd ref = 0.5 * r.bases[0].eigencurrents.transpose().cast<cd>() * z12 *
                        r.bases[1].eigencurrents.cast<cd>();
  CHECK((g.block(0, 1) - ref).norm() < 1e-5 * ref.norm());
}

TEST_CASE("real part of the coupling is the cross term of the radiated power") {
  // 1/2 Re(I1^T Z12 I2) for real eigencurrents is half the interference
  // power of the two modes radiating together.
  const auto r = row(2, 0.56 * lam(), 1, 10);
  const auto g = assemble_coupling(r.bases, r.z);
  const int n1 = r.bases[0].basis_count();
  VectorXcd i1 = VectorXcd::Zero(r.mesh->basis_count()), i2 = i1;
  i1.head(n1) = r.bases[0].eigencurrents.col(0).cast<cd>();
  i2.tail(r.bases[1].basis_count()) = r.bases[1].eigencurrents.col(0).cast<cd>();
  const double p1 = radiated_power(i1, *r.mesh, kF);
  const double p2 = radiated_power(i2, *r.mesh, kF);
  const double cross = 0.5 * (radiated_power(i1 + i2, *r.mesh, kF) - p1 - p2);
  CHECK(g.block(0, 1)(0, 0).real() == doctest::Approx(cross).epsilon(0.02));
}

TEST_CASE("coupling decays with separation") {
  // Collinear pairs couple through the 1/R^2 terms only.
  auto collinear = [](double spacing) {
    WireGeometry g;
    for (int k = 0; k < 2; ++k) {
      DipoleSpec d;
      d.axis = Vec3::UnitX();
      d.center = Vec3(k * spacing, 0, 0);
      d.length = 0.47 * lam();
      d.radius = 1e-3 * lam();
      d.segments = 8;
      d.element_id = k + 1;
      add_dipole(g, d);
    }
    const WireMesh m(g);
    const auto z = assemble_impedance(m, kF);
    std::vector<CharacteristicBasis> bases;
    for (int id : {1, 2}) {
      bases.push_back(compute_characteristic_modes(extract_block(z, id, id), 2, m.element_mesh(id)));
    }
    return assemble_coupling(bases, z).block(0, 1).norm();
  };
  CHECK(collinear(10.0 * lam()) < 0.01 * collinear(0.5 * lam()));

  // Side by side the radiation term falls off as 1/R only.
  double previous = 1e300;
  for (double s : {0.5, 1.0, 2.0, 5.0, 10.0}) {
    const auto r = row(2, s * lam(), 2);
    const double g = assemble_coupling(r.bases, r.z).block(0, 1).norm();
    CHECK(g < previous);
    previous = g;
  }
}

TEST_CASE("assembly structure") {
  const auto one = row(1, 0.0, 2);
  const auto g1 = assemble_coupling(one.bases, one.z);
  CHECK(g1.blocks.empty());
  CHECK(g1.dense().norm() == 0.0);
  CHECK(g1.total_modes() == 2);

  const auto three = row(3, 0.56 * lam(), 2);
  const auto g = assemble_coupling(three.bases, three.z);
  CHECK(g.blocks.size() == 6);
  CHECK(g.block(0, 0).norm() == 0.0);
  CHECK_THROWS_AS(g.block(0, 3), IndexError);
  // Translation symmetry of identical equally spaced elements.
  CHECK((g.block(0, 1) - g.block(1, 2)).norm() < 1e-9 * g.block(0, 1).norm());
  for (const auto& [kl, b] : g.blocks) {
    CHECK((g.block(kl.second, kl.first) - b.transpose()).norm() < 1e-10 * b.norm());
  }
  const MatrixXcd d = g.dense();
  CHECK(d.rows() == 6);
  CHECK((d - d.transpose()).norm() < 1e-10 * d.norm());
  CHECK(g.offset(2) == 4);

  auto partial = three.bases;
  partial.pop_back();
  CHECK_THROWS_AS(assemble_coupling(partial, three.z), DimensionError);

  const auto zc = zero_coupling(three.bases);
  CHECK(zc.dense().norm() == 0.0);
  CHECK(zc.mode_counts == g.mode_counts);
}

TEST_CASE("coupling is linear in the impedance block") {
  const auto r = row(2, 0.56 * lam(), 3);
  std::mt19937_64 rng(41);
  ImpedanceMatrix a, b, ab;
  const int n = r.bases[0].basis_count();
  a.entries = MatrixXcd::Zero(n, n);
  b.entries = a.entries;
  for (int i = 0; i < n; ++i) {
    a.entries.col(i) = fixtures::random_vector(n, rng);
    b.entries.col(i) = fixtures::random_vector(n, rng);
  }
  const cd c(0.3, -1.7);
  ab.entries = a.entries + c * b.entries;
  const MatrixXcd lhs = coupling_block(r.bases[0], r.bases[1], ab);
  const MatrixXcd rhs = coupling_block(r.bases[0], r.bases[1], a) + c * coupling_block(r.bases[0], r.bases[1], b);
  CHECK((lhs - rhs).norm() < 1e-12 * lhs.norm());
}

TEST_CASE("flipping an eigencurrent sign flips the coupling rows") {
  auto r = row(2, 0.56 * lam(), 3);
  const auto g = assemble_coupling(r.bases, r.z);
  r.bases[1].eigencurrents.col(1) *= -1.0;
  const auto h = assemble_coupling(r.bases, r.z);
  MatrixXcd expect = g.block(0, 1);
  expect.col(1) *= -1.0;
  CHECK((h.block(0, 1) - expect).norm() < 1e-14 * expect.norm());
  MatrixXcd expect_t = g.block(1, 0);
  expect_t.row(1) *= -1.0;
  CHECK((h.block(1, 0) - expect_t).norm() < 1e-14 * expect_t.norm());
}

TEST_CASE("external incidence") {
  WireGeometry g;
  add_crossed_dipole(g, Vec3::Zero(), 0.47 * lam(), 1e-3 * lam(), 10, 1);
  const auto mesh = std::make_shared<WireMesh>(g);
  const auto z = assemble_impedance(*mesh, kF);
  const auto b = compute_characteristic_modes(z, 2, *mesh);

  PlaneWave pw;
  pw.direction = Vec3(0, 0, -1);
  pw.polarization = Eigen::Vector3cd(1, 0, 0);
  pw.amplitude = 0.0;
  CHECK(external_incidence(b, pw).norm() == 0.0);

  pw.amplitude = cd(1.0, 0.5);
  const VectorXcd a = external_incidence(b, pw);
  // Mode 0 lies on the x arm.
  CHECK(20.0 * std::log10(std::abs(a[0]) / std::abs(a[1])) > 30.0);
  const VectorXcd ref = -0.5 * b.eigencurrents.transpose().cast<cd>() *
                        pws_oracle::tested_plane_wave(*mesh, kF, pw);
  CHECK((a - ref).norm() < 1e-9 * ref.norm());
}

TEST_CASE("received wave agrees with the direct solve and the transmit pattern") {
  // Full modal basis of one dipole: the receive response R a_ext must equal
  // the loaded MoM solve under the same plane wave, and by reciprocity its
  // direction dependence follows the transmit pattern.
  WireGeometry geo;
  DipoleSpec d;
  d.axis = Vec3(1, 0, 1).normalized();
  d.length = 0.47 * lam();
  d.radius = 1e-3 * lam();
  d.segments = 12;
  add_dipole(geo, d);
  const auto mesh = std::make_shared<WireMesh>(geo);
  const auto z = assemble_impedance(*mesh, kF);
  const auto b = compute_characteristic_modes(z, mesh->basis_count(), *mesh);
  const double zref = 60.0;
  const auto gsm = measured_element_gsm(b, z, mesh->port_basis(), zref);
  const MatrixXcd ip = port_drive_columns(z, mesh->port_basis(), zref);

  struct Look {
    double theta, phi;
  };
  std::vector<cd> received;
  std::vector<cd> transmitted;
  for (const Look l : {Look{0.9, 0.2}, Look{2.0, 1.1}, Look{1.4, -2.4}}) {
    const Vec3 r = radial(l.theta, l.phi);
    const Vec3 th(std::cos(l.theta) * std::cos(l.phi), std::cos(l.theta) * std::sin(l.phi),
                  -std::sin(l.theta));
    PlaneWave pw;
    pw.direction = -r;  // arriving from (theta, phi)
    pw.polarization = th.cast<cd>();
    const VectorXcd a = external_incidence(b, pw);
    const cd w = (gsm.R * a)(0);

    // Loaded MoM solve with the port terminated in zref.
    MatrixXcd loaded = z.entries;
    const int p = mesh->port_basis()[0];
    loaded(p, p) += zref;
    const VectorXcd i = loaded.partialPivLu().solve(plane_wave_excitation(*mesh, kF, pw));
    const cd w_direct = -std::sqrt(zref) * i[p];
    CHECK(std::abs(w - w_direct) < 1e-6 * std::abs(w_direct));

    received.push_back(w);
    transmitted.push_back(field_vector(ip.col(0), *mesh, l.theta, l.phi).dot(th.cast<cd>()));
  }
  for (std::size_t n = 1; n < received.size(); ++n) {
    const double rr = std::abs(received[n] / received[0]);
    const double tr = std::abs(transmitted[n] / transmitted[0]);
    CHECK(rr == doctest::Approx(tr).epsilon(0.02));
  }
}

TEST_CASE("coupling json round trip") {
  const auto r = row(3, 0.56 * lam(), 2);
  const auto g = assemble_coupling(r.bases, r.z);
  const auto back = coupling_from_json(coupling_to_json(g));
  CHECK(back.element_count == 3);
  CHECK(back.mode_counts == g.mode_counts);
  CHECK(back.dense() == g.dense());
  CHECK(coupling_to_json(back) == coupling_to_json(g));
  CHECK_THROWS_AS(coupling_from_json("{}"), FormatError);
}
