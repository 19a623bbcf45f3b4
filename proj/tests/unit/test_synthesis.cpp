#include <doctest.h>

#include "cmsynth/synthesis.hpp"
#include "fixtures.hpp"

using namespace cmsynth;
using fixtures::kF;
using fixtures::lam;
using Vec2c = Eigen::Vector2cd;

namespace {

// Shared grid model; assembling it dominates the suite's runtime.
const fixtures::Grid& grid() {
  static const fixtures::Grid g = fixtures::crossed_grid();
  return g;
}

ModalCouplingMatrix pair_coupling(const Eigen::Matrix2cd& g12) {
  ModalCouplingMatrix g;
  g.element_count = 2;
  g.mode_counts = {2, 2};
  g.blocks[{0, 1}] = g12;
  g.blocks[{1, 0}] = g12.transpose();
  return g;
}

ModalCouplingMatrix uncoupled(int k) {
  ModalCouplingMatrix g;
  g.element_count = k;
  g.mode_counts.assign(k, 2);
  return g;
}

// Grid position transposed: element (i, j) <-> (j, i), ids row-major.
int transposed(int k) { return 3 * (k % 3) + k / 3; }

}  // namespace

TEST_CASE("incident field from neighbours") {
  const Vec2c u = target_left();
  CHECK(incident_from_neighbors(uncoupled(3), u, 1).norm() == 0.0);

  const cd gamma(0.2, -0.7);
  const auto g = pair_coupling(gamma * Eigen::Matrix2cd::Identity());
  CHECK((incident_from_neighbors(g, u, 0) - gamma * u).norm() < 1e-15);
  CHECK_THROWS_AS(incident_from_neighbors(g, u, 2), IndexError);

  // The centre of the grid has more neighbours than a corner.
  const double corner = incident_from_neighbors(grid().g, u, 0).norm();
  const double centre = incident_from_neighbors(grid().g, u, 4).norm();
  CHECK(centre > corner);
}

TEST_CASE("cross target") {
  CHECK((cross_target(target_left()) + kJ * target_right()).norm() < 1e-15);
  CHECK(std::abs(cross_target(target_left()).dot(target_left())) < 1e-15);
  CHECK(std::abs(target_right().dot(target_left())) < 1e-15);
}

TEST_CASE("uncoupled synthesis is the trivial solution") {
  SynthesisConfig cfg;
  const auto r = synthesize(uncoupled(4), cfg);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  for (int k = 0; k < 4; ++k) {
    CHECK((r.transmit[k] - cfg.target).norm() < 1e-15);
    CHECK(r.v[k] == doctest::Approx(0.5).epsilon(1e-15));
  }
  CHECK(r.q == doctest::Approx(0.5));

  // With the grid's bases but no coupling, before and after coincide.
  const auto g0 = zero_coupling(grid().bases);
  const auto r9 = synthesize(g0, cfg);
  const auto rep = evaluate_result(r9, g0, grid().bases, std::nullopt);
  CHECK((rep.f_initial - rep.f_final).norm() < 1e-14);
  CHECK(rep.modal_initial_db == rep.modal_final_db);
}

TEST_CASE("every step yields unit transmit vectors and unit total power") {
  SynthesisConfig cfg;
  cfg.max_iterations = 8;
  cfg.threshold = 1e-300;  // run every step
  const auto r = synthesize(grid().g, cfg);
  CHECK(r.trace.size() == 8);
  CHECK_FALSE(r.converged);
  for (const auto& s : r.trace) {
    CHECK(s.v.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.q > 0.0);
    for (int k = 0; k < 9; ++k) {
      CHECK(std::abs(s.transmit[k].norm() - 1.0) < 1e-12);
      CHECK(s.v[k] > 0.0);
      // The S0' that goes with this T' keeps the element reciprocal.
      const cd sigma = cfg.sigma_of(k);
      const auto syn = synthetic_from_transmit(s.transmit[k], sigma);
      CHECK(reciprocity_residual(syn.s0, syn.T) < 1e-10);
    }
  }
  // Each step's S0' is derived from the previous step's T'.
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    for (int k = 0; k < 9; ++k) {
      const auto syn = synthetic_from_transmit(r.trace[i - 1].transmit[k], cfg.sigma_of(k));
      CHECK((r.trace[i].s0[k] - Vec2c(syn.s0)).norm() < 1e-14);
    }
  }
}

TEST_CASE("grid synthesis converges and is self-consistent") {
  SynthesisConfig cfg;
  const auto r = synthesize(grid().g, cfg);
  REQUIRE(r.converged);
  CHECK(r.iterations <= 20);
  CHECK(r.trace.back().step_change < cfg.threshold);
  CHECK(r.v.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));

  const auto rep = evaluate_result(r, grid().g, grid().bases, CutSpec::uniform(0, -90, 90, 181), -30, 30);
  for (double e : rep.plugback_error) CHECK(e < 0.01);
  CHECK(rep.modal_final_db >= 25.0);
  CHECK(rep.modal_final_db - rep.modal_initial_db > 10.0);
  CHECK(rep.has_field);
  CHECK(rep.field_final_db > rep.field_initial_db);

  // The transmit fields are pre-distorted: not simply the target.
  double worst = 0.0;
  for (int k = 0; k < 9; ++k) {
    const Vec2c ft = r.transmit[k] * r.v[k];
    worst = std::max(worst, std::abs(cross_target(cfg.target).dot(ft)) / ft.norm());
  }
  CHECK(worst > 0.01);

  // Fixed point: one more step moves each element's transmit field T'v by
  // less than threshold/K, and the unit T' by less than the threshold.
  const SynthesisState& last = r.trace.back();
  const auto next = iterate_step(last, grid().g, cfg);
  for (int k = 0; k < 9; ++k) {
    CHECK((next.transmit[k] * next.v[k] - last.transmit[k] * last.v[k]).norm() < cfg.threshold / 9.0);
    CHECK((next.transmit[k] - last.transmit[k]).norm() < cfg.threshold);
  }
}

TEST_CASE("right-hand target gives the mirrored solution") {
  // Reflecting the grid in the diagonal swaps the arms (mode 1 <-> mode 2)
  // and transposes element positions; u_R = j P u_L with P the swap.
  SynthesisConfig left;
  SynthesisConfig right;
  right.target = target_right();
  right.sigma.assign(9, -kJ);
  const auto a = synthesize(grid().g, left);
  const auto b = synthesize(grid().g, right);
  CHECK(a.iterations == b.iterations);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    for (int k = 0; k < 9; ++k) {
      const Vec2c& tl = a.trace[i].transmit[transposed(k)];
      const Vec2c mirrored = kJ * Vec2c(tl[1], tl[0]);
      CHECK((b.trace[i].transmit[k] - mirrored).norm() < 1e-9);
      CHECK(std::abs(b.trace[i].v[k] - a.trace[i].v[transposed(k)]) < 1e-9);
    }
  }
}

TEST_CASE("literal scatter term is not self-consistent") {
  SynthesisConfig cfg;
  cfg.scatter = ScatterTerm::Literal;
  const auto r = synthesize(grid().g, cfg);
  const auto rep = evaluate_result(r, grid().g, grid().bases, std::nullopt);
  double worst = 0.0;
  for (double e : rep.plugback_error) worst = std::max(worst, e);
  CHECK(worst > 0.1);
  CHECK_FALSE(rep.has_field);
}

TEST_CASE("degenerate target is reported") {
  // Choose G^(1,2) so that (S' - I) alpha = u on element 1 at the first step.
  const Vec2c u = target_left();
  const auto syn = synthetic_from_transmit(u, kJ);
  const Eigen::Matrix2cd sm = syn.S - Eigen::Matrix2cd::Identity();
  const auto g = pair_coupling(sm.inverse());
  try {
    synthesize(g, SynthesisConfig{});
    FAIL("degenerate element accepted");
  } catch (const NumericalError& e) {
    CHECK(e.kind() == "degenerate_target");
  }
}

TEST_CASE("configuration validation") {
  SynthesisConfig cfg;
  cfg.target = Vec2c(1.0, 1.0);
  CHECK_THROWS_AS(synthesize(uncoupled(2), cfg), ConfigError);
  cfg = {};
  cfg.threshold = 0.0;
  CHECK_THROWS_AS(synthesize(uncoupled(2), cfg), ConfigError);
  cfg = {};
  cfg.sigma = {kJ};
  CHECK_THROWS_AS(synthesize(uncoupled(2), cfg), ConfigError);
  cfg = {};
  cfg.sigma = {kJ, 2.0 * kJ};
  CHECK_THROWS_AS(synthesize(uncoupled(2), cfg), ConfigError);
  cfg = {};
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(synthesize(uncoupled(2), cfg), ConfigError);

  ModalCouplingMatrix three;
  three.element_count = 2;
  three.mode_counts = {3, 2};
  CHECK_THROWS_AS(synthesize(three, SynthesisConfig{}), DimensionError);

  cfg = {};
  cfg.initial_transmit = {target_right(), target_right()};
  const auto r = synthesize(uncoupled(2), cfg);
  CHECK((r.transmit[0] - target_left()).norm() < 1e-15);
}

TEST_CASE("synthesis result json round trip") {
  SynthesisConfig cfg;
  const auto r = synthesize(grid().g, cfg);
  const std::string text = synthesis_to_json(r);
  const auto back = synthesis_from_json(text);
  CHECK(synthesis_to_json(back) == text);
  CHECK(back.iterations == r.iterations);
  CHECK(back.converged == r.converged);
  CHECK(back.v == r.v);
  for (int k = 0; k < 9; ++k) CHECK(back.transmit[k] == r.transmit[k]);

  const auto cut = CutSpec::uniform(0, -90, 90, 91);
  const auto x = evaluate_result(r, grid().g, grid().bases, cut);
  const auto y = evaluate_result(back, grid().g, grid().bases, cut);
  CHECK(std::abs(x.modal_final_db - y.modal_final_db) < 1e-9);
  CHECK(std::abs(x.field_final_db - y.field_final_db) < 1e-9);

  CHECK_THROWS_AS(synthesis_from_json("{}"), FormatError);
}

TEST_CASE("modal XPR") {
  VectorXcd f(4);
  f << target_left(), 2.0 * target_left();
  CHECK(modal_xpr_db(f, target_left()) == kXprCapDb);
  f.tail(2) = target_right();
  CHECK(modal_xpr_db(f, target_left()) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(modal_xpr_db(VectorXcd::Zero(3), target_left()), DimensionError);
}
