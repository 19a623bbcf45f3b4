#include "cmsynth/synthesis.hpp"

#include <json.hpp>

#include <cmath>

namespace cmsynth {

namespace {

using json = nlohmann::json;
using Vec2c = Eigen::Vector2cd;

constexpr double kDegenerate = 1e-14;

json cjson(cd z) { return json::array({z.real(), z.imag()}); }

cd cfrom(const json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatError("complex value must be [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json vjson(const Vec2c& v) { return json::array({cjson(v[0]), cjson(v[1])}); }

Vec2c vfrom(const json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatError("modal vector must have two entries");
  return Vec2c(cfrom(j[0]), cfrom(j[1]));
}

Eigen::Matrix2cd s0_matrix(const Vec2c& t, cd sigma) {
  Eigen::Matrix2cd s = Eigen::Matrix2cd::Zero();
  for (int n = 0; n < 2; ++n) s(n, n) = sigma * std::polar(1.0, 2.0 * std::arg(t[n]));
  return s;
}

double deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace

Vec2c target_left() { return Vec2c(1.0, -kJ) / std::sqrt(2.0); }
Vec2c target_right() { return Vec2c(1.0, kJ) / std::sqrt(2.0); }
Vec2c cross_target(const Vec2c& u) { return Vec2c(-std::conj(u[1]), std::conj(u[0])); }

void SynthesisConfig::validate(int element_count) const {
  if (std::abs(target.norm() - 1.0) > 1e-12) throw ConfigError("synthesis target must be unit norm");
  if (!(threshold > 0.0)) throw ConfigError("convergence threshold must be positive");
  if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (!sigma.empty() && static_cast<int>(sigma.size()) != element_count) {
    throw ConfigError("sigma list length differs from the element count");
  }
  for (cd s : sigma) {
    if (std::abs(std::abs(s) - 1.0) > 1e-12) throw ConfigError("sigma must have unit modulus");
  }
  if (!initial_transmit.empty() &&
      static_cast<int>(initial_transmit.size()) != element_count) {
    throw ConfigError("initial transmit list length differs from the element count");
  }
  for (const auto& t : initial_transmit) {
    if (std::abs(t.norm() - 1.0) > 1e-12) throw ConfigError("initial transmit vectors must be unit norm");
  }
}

cd SynthesisConfig::sigma_of(int k) const { return sigma.empty() ? kJ : sigma[k]; }

std::vector<Vec2c> SynthesisResult::transmit_field() const {
  std::vector<Vec2c> out;
  for (std::size_t k = 0; k < transmit.size(); ++k) out.push_back(transmit[k] * v[static_cast<Eigen::Index>(k)]);
  return out;
}

Vec2c incident_from_neighbors(const ModalCouplingMatrix& g, const Vec2c& target, int k) {
  if (k < 0 || k >= g.element_count) throw IndexError("element index out of range");
  Vec2c alpha = Vec2c::Zero();
  for (int l = 0; l < g.element_count; ++l) {
    if (l == k) continue;
    const MatrixXcd b = g.block(k, l);
    if (b.rows() != 2 || b.cols() != 2) throw DimensionError("synthesis needs two-mode elements");
    alpha += b * target;
  }
  return alpha;
}

SynthesisState initial_state(int element_count, const SynthesisConfig& config) {
  config.validate(element_count);
  SynthesisState s;
  s.v = VectorXd::Constant(element_count, 1.0 / std::sqrt(static_cast<double>(element_count)));
  s.q = 1.0 / std::sqrt(static_cast<double>(element_count));
  for (int k = 0; k < element_count; ++k) {
    const Vec2c t = config.initial_transmit.empty() ? config.target : config.initial_transmit[k];
    s.transmit.push_back(t);
    s.s0.push_back(s0_matrix(t, config.sigma_of(k)).diagonal());
  }
  return s;
}

SynthesisState iterate_step(const SynthesisState& previous, const ModalCouplingMatrix& g,
                            const SynthesisConfig& config) {
  const int kk = g.element_count;
  if (static_cast<int>(previous.transmit.size()) != kk) {
    throw DimensionError("synthesis state and coupling matrix differ in element count");
  }
  SynthesisState next;
  std::vector<Vec2c> r(kk);
  std::vector<double> rn(kk);
  double total = 0.0;
  for (int k = 0; k < kk; ++k) {
    const Vec2c& t = previous.transmit[k];
    const Eigen::Matrix2cd s0 = s0_matrix(t, config.sigma_of(k));
    const Eigen::Matrix2cd s = s0 * (Eigen::Matrix2cd::Identity() - t.conjugate() * t.transpose());
    const Vec2c alpha = incident_from_neighbors(g, config.target, k);
    const Eigen::Matrix2cd scatter =
        config.scatter == ScatterTerm::Outgoing ? Eigen::Matrix2cd(s - Eigen::Matrix2cd::Identity()) : s;
    r[k] = config.target - scatter * alpha;
    rn[k] = r[k].norm();
    if (!(rn[k] > kDegenerate)) {
      throw NumericalError("degenerate_target",
                           "element " + std::to_string(k + 1) + " needs no transmit drive", rn[k]);
    }
    total += rn[k] * rn[k];
    next.s0.push_back(s0.diagonal());
  }
  next.q = 1.0 / std::sqrt(total);
  next.v.resize(kk);
  for (int k = 0; k < kk; ++k) {
    next.transmit.push_back(r[k] / rn[k]);
    next.v[k] = next.q * rn[k];
    next.step_change += (next.transmit[k] * next.v[k] - previous.transmit[k] * previous.v[k]).norm();
  }
  return next;
}

SynthesisResult synthesize(const ModalCouplingMatrix& g, const SynthesisConfig& config) {
  const int kk = g.element_count;
  for (int m : g.mode_counts) {
    if (m != 2) throw DimensionError("synthesis needs two-mode elements");
  }
  SynthesisState state = initial_state(kk, config);
  SynthesisResult res;
  res.target = config.target;
  res.threshold = config.threshold;
  for (int k = 0; k < kk; ++k) res.sigma.push_back(config.sigma_of(k));
  for (int it = 1; it <= config.max_iterations; ++it) {
    state = iterate_step(state, g, config);
    res.trace.push_back(state);
    res.iterations = it;
    if (state.step_change < config.threshold) {
      res.converged = true;
      break;
    }
  }
  res.transmit = state.transmit;
  res.v = state.v;
  res.q = state.q;
  for (int k = 0; k < kk; ++k) {
    res.params.push_back(synthetic_params(synthetic_from_transmit(res.transmit[k], res.sigma[k]), res.sigma[k]));
  }
  return res;
}

ArrayModel synthetic_array(const std::vector<Vec2c>& transmit, const std::vector<cd>& sigma,
                           const ModalCouplingMatrix& g,
                           const std::vector<CharacteristicBasis>& bases) {
  if (transmit.size() != sigma.size()) throw DimensionError("transmit and sigma lists differ in length");
  ArrayModel m;
  for (std::size_t k = 0; k < transmit.size(); ++k) {
    m.elements.push_back(synthetic_from_transmit(transmit[k], sigma[k]));
  }
  m.coupling = g;
  m.bases = bases;
  m.validate();
  return m;
}

double modal_xpr_db(const VectorXcd& f, const Vec2c& target) {
  if (f.size() % 2 != 0) throw DimensionError("modal vector must stack two-mode elements");
  const Vec2c cross = cross_target(target);
  double co = 0.0, xp = 0.0;
  for (Eigen::Index k = 0; k < f.size() / 2; ++k) {
    const Vec2c fk = f.segment<2>(2 * k);
    co += std::norm(target.dot(fk));
    xp += std::norm(cross.dot(fk));
  }
  return ratio_db(co, xp);
}

XprReport evaluate_result(const SynthesisResult& result, const ModalCouplingMatrix& g,
                          const std::vector<CharacteristicBasis>& bases,
                          const std::optional<CutSpec>& cut, double theta_min,
                          double theta_max) {
  const auto kk = static_cast<int>(result.transmit.size());
  const std::vector<Vec2c> initial(kk, result.target);
  const VectorXcd v0 = VectorXcd::Constant(kk, 1.0 / std::sqrt(static_cast<double>(kk)));
  const VectorXcd a0 = VectorXcd::Zero(2 * kk);
  XprReport rep;
  rep.f_initial = solve_excitation(synthetic_array(initial, result.sigma, g, bases), v0, a0).f;
  rep.f_final = solve_excitation(synthetic_array(result.transmit, result.sigma, g, bases),
                                 result.v.cast<cd>(), a0).f;
  rep.modal_initial_db = modal_xpr_db(rep.f_initial, result.target);
  rep.modal_final_db = modal_xpr_db(rep.f_final, result.target);
  for (int k = 0; k < kk; ++k) {
    const Vec2c fk = rep.f_final.segment<2>(2 * k);
    rep.plugback_error.push_back((fk - result.q * result.target).norm() / result.q);
  }
  bool meshes = !bases.empty();
  for (const auto& b : bases) meshes = meshes && b.mesh != nullptr;
  if (cut && meshes) {
    const Handedness co = std::abs(target_left().dot(result.target)) >=
                                  std::abs(target_right().dot(result.target))
                              ? Handedness::Left
                              : Handedness::Right;
    rep.has_field = true;
    rep.field_initial_db =
        circular_components(array_farfield(rep.f_initial, bases, *cut), co, theta_min, theta_max).xpr_db;
    rep.field_final_db =
        circular_components(array_farfield(rep.f_final, bases, *cut), co, theta_min, theta_max).xpr_db;
  }
  return rep;
}

std::string synthesis_to_json(const SynthesisResult& r) {
  json j;
  j["target"] = vjson(r.target);
  j["threshold"] = r.threshold;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["q"] = r.q;
  double vsum = 0.0;
  for (Eigen::Index k = 0; k < r.v.size(); ++k) vsum += r.v[k] * r.v[k];
  j["sum_v_squared"] = vsum;
  j["elements"] = json::array();
  for (std::size_t k = 0; k < r.transmit.size(); ++k) {
    const auto& p = r.params[k];
    json e;
    e["k"] = k + 1;
    e["sigma"] = cjson(r.sigma[k]);
    e["v"] = r.v[static_cast<Eigen::Index>(k)];
    e["transmit"] = vjson(r.transmit[k]);
    e["t_magnitudes"] = p.t_magnitudes;
    std::vector<double> sdeg, tdeg;
    for (double s : p.s_phases) sdeg.push_back(deg(s));
    for (int n = 0; n < 2; ++n) tdeg.push_back(deg(std::arg(r.transmit[k][n])));
    e["s_phases_deg"] = sdeg;
    e["t_phases_deg"] = tdeg;
    j["elements"].push_back(e);
  }
  j["trace"] = json::array();
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const auto& s = r.trace[i];
    json t;
    t["step"] = i + 1;
    t["step_change"] = s.step_change;
    t["q"] = s.q;
    t["v"] = std::vector<double>(s.v.data(), s.v.data() + s.v.size());
    t["transmit"] = json::array();
    for (const auto& tv : s.transmit) t["transmit"].push_back(vjson(tv));
    j["trace"].push_back(t);
  }
  return j.dump(2) + "\n";
}

SynthesisResult synthesis_from_json(const std::string& text) {
  SynthesisResult r;
  try {
    const json j = json::parse(text);
    r.target = vfrom(j.at("target"));
    r.threshold = j.at("threshold").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.q = j.at("q").get<double>();
    const auto& els = j.at("elements");
    r.v.resize(static_cast<Eigen::Index>(els.size()));
    for (std::size_t k = 0; k < els.size(); ++k) {
      const auto& e = els[k];
      r.sigma.push_back(cfrom(e.at("sigma")));
      r.v[static_cast<Eigen::Index>(k)] = e.at("v").get<double>();
      r.transmit.push_back(vfrom(e.at("transmit")));
      r.params.push_back(synthetic_params(synthetic_from_transmit(r.transmit.back(), r.sigma.back()),
                                          r.sigma.back()));
    }
    for (const auto& t : j.at("trace")) {
      SynthesisState s;
      s.step_change = t.at("step_change").get<double>();
      s.q = t.at("q").get<double>();
      const auto v = t.at("v").get<std::vector<double>>();
      s.v = Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      for (const auto& tv : t.at("transmit")) s.transmit.push_back(vfrom(tv));
      r.trace.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("synthesis result: ") + e.what());
  }
  return r;
}

}  // namespace cmsynth
