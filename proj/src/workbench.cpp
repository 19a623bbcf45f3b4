#include "cmsynth/workbench.hpp"

#include "cmsynth/array_solver.hpp"
#include "cmsynth/coupling.hpp"
#include "cmsynth/gsm.hpp"
#include "cmsynth/layouts.hpp"
#include "cmsynth/matrix_io.hpp"
#include "cmsynth/modal_core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace cmsynth {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

json cjson(cd z) { return json::array({z.real(), z.imag()}); }

json cvec(const VectorXcd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(cjson(v[i]));
  return a;
}

cd cfrom(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(what + " must be [re, im]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) throw ConfigError(what + " must be an integer");
  return j.get<int>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || fs::path(path).is_absolute() || base.empty()) return path;
  return (fs::path(base) / path).string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string fixed2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string phi_tag(double phi) { return "phi" + io::format_double(phi); }

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

BuiltinLayout builtin_defaults(const std::string& name) {
  BuiltinLayout b;
  b.name = name;
  if (name == "dipole") {
    b.length = 0.5;
  } else if (name == "crossed-dipole" || name == "dipole-pair") {
  } else if (name == "grid3x3-crossed") {
    b.height = 0.1;
  } else {
    throw ConfigError("unknown builtin layout '" + name + "'");
  }
  return b;
}

WireGeometry builtin_geometry(const BuiltinLayout& b, double frequency_hz) {
  const double lam = wavelength(frequency_hz);
  const double z = b.height * lam;
  WireGeometry g;
  auto dipole = [&](const Vec3& c, int id) {
    DipoleSpec d;
    d.center = c;
    d.axis = Vec3::UnitX();
    d.length = b.length * lam;
    d.radius = b.radius * lam;
    d.segments = b.segments;
    d.element_id = id;
    add_dipole(g, d);
  };
  if (b.name == "dipole") {
    dipole(Vec3(0, 0, z), 1);
  } else if (b.name == "dipole-pair") {
    dipole(Vec3(0, -0.5 * b.spacing * lam, z), 1);
    dipole(Vec3(0, 0.5 * b.spacing * lam, z), 2);
  } else if (b.name == "crossed-dipole") {
    add_crossed_dipole(g, Vec3(0, 0, z), b.length * lam, b.radius * lam, b.segments, 1);
  } else if (b.name == "grid3x3-crossed") {
    // k = 1..9 row by row from the top left corner (+y up, +x right).
    int id = 1;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const Vec3 c((j - 1) * b.spacing * lam, (1 - i) * b.spacing * lam, z);
        add_crossed_dipole(g, c, b.length * lam, b.radius * lam, b.segments, id++);
      }
    }
  } else {
    throw ConfigError("unknown builtin layout '" + b.name + "'");
  }
  if (b.height > 0.0) g.ground = GroundPlane{0.0};
  return g;
}

void RunConfig::validate() const {
  if (!builtin && geometry_file.empty()) throw ConfigError("no geometry given");
  if (!geometry_file.empty() && !fs::is_regular_file(geometry_file)) {
    throw ConfigError("geometry file not found: " + geometry_file);
  }
  if (builtin) {
    const auto& b = *builtin;
    if (!(b.spacing > 0.0 && b.length > 0.0 && b.radius > 0.0)) {
      throw ConfigError("builtin spacing, length and radius must be positive");
    }
    if (b.segments < 2 || b.segments % 2 != 0) {
      throw ConfigError("builtin segments must be even and at least 2");
    }
    if (b.height < 0.0) throw ConfigError("builtin height must not be negative");
  }
  if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz)) {
    throw ConfigError("frequency_hz must be positive");
  }
  if (modes_per_element < 0) throw ConfigError("modes_per_element must be positive");
  if (!(reference_impedance > 0.0)) throw ConfigError("reference_impedance must be positive");
  if (drive_mode == "file" && !fs::is_regular_file(drive_file)) {
    throw ConfigError("drive file not found: " + drive_file);
  }
  if (cuts.empty()) throw ConfigError("at least one cut is required");
  for (const auto& c : cuts) {
    if (c.count < 1) throw ConfigError("cut count must be positive");
  }
  const auto& s = synthesis;
  if (std::abs(s.target.norm() - 1.0) > 1e-12) throw ConfigError("synthesis target must be unit norm");
  if (!(s.threshold > 0.0)) throw ConfigError("synthesis threshold must be positive");
  if (s.max_iterations < 1) throw ConfigError("max_iterations must be positive");
  if (!(s.theta_min <= s.theta_max)) throw ConfigError("xpr_theta range is empty");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"geometry", "frequency_hz", "modes_per_element", "reference_impedance", "drive",
                  "drive_file", "seed", "plane_wave", "synthesis", "cuts", "output_dir"},
                 "config");
  RunConfig c;
  c.hash = hex64(fnv1a64(j.dump()));

  if (!j.contains("geometry")) throw ConfigError("config lacks 'geometry'");
  const json& g = j["geometry"];
  if (!g.is_object()) throw ConfigError("geometry must be an object");
  if (g.contains("file")) {
    reject_unknown(g, {"file"}, "geometry");
    c.geometry_file = resolve(g["file"].get<std::string>(), base_dir);
  } else if (g.contains("builtin")) {
    reject_unknown(g, {"builtin", "spacing", "length", "segments", "radius", "height"}, "geometry");
    if (!g["builtin"].is_string()) throw ConfigError("geometry.builtin must be a string");
    BuiltinLayout b = builtin_defaults(g["builtin"].get<std::string>());
    if (g.contains("spacing")) b.spacing = number(g["spacing"], "geometry.spacing");
    if (g.contains("length")) b.length = number(g["length"], "geometry.length");
    if (g.contains("segments")) b.segments = integer(g["segments"], "geometry.segments");
    if (g.contains("radius")) b.radius = number(g["radius"], "geometry.radius");
    if (g.contains("height")) b.height = number(g["height"], "geometry.height");
    c.builtin = b;
  } else {
    throw ConfigError("geometry needs 'file' or 'builtin'");
  }

  if (j.contains("frequency_hz")) c.frequency_hz = number(j["frequency_hz"], "frequency_hz");
  if (j.contains("modes_per_element")) {
    const json& m = j["modes_per_element"];
    if (m.is_string() && m.get<std::string>() == "all") {
      c.modes_per_element = 0;
    } else {
      c.modes_per_element = integer(m, "modes_per_element");
      if (c.modes_per_element < 1) throw ConfigError("modes_per_element must be at least 1");
    }
  }
  if (j.contains("reference_impedance")) {
    c.reference_impedance = number(j["reference_impedance"], "reference_impedance");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("drive") && j.contains("drive_file")) {
    throw ConfigError("give either 'drive' or 'drive_file'");
  }
  if (j.contains("drive")) {
    const json& d = j["drive"];
    if (d.is_string()) {
      c.drive_mode = d.get<std::string>();
      if (c.drive_mode != "random" && c.drive_mode != "uniform") {
        throw ConfigError("drive must be a list, 'random' or 'uniform'");
      }
    } else if (d.is_array()) {
      c.drive_mode = "list";
      for (const auto& x : d) c.drive.push_back(cfrom(x, "drive entry"));
    } else {
      throw ConfigError("drive must be a list, 'random' or 'uniform'");
    }
  }
  if (j.contains("drive_file")) {
    c.drive_mode = "file";
    c.drive_file = resolve(j["drive_file"].get<std::string>(), base_dir);
  }
  if (j.contains("plane_wave")) {
    const json& p = j["plane_wave"];
    reject_unknown(p, {"direction", "polarization", "amplitude"}, "plane_wave");
    PlaneWave w;
    const auto dir = p.at("direction").get<std::vector<double>>();
    if (dir.size() != 3) throw ConfigError("plane_wave.direction must have 3 entries");
    w.direction = Vec3(dir[0], dir[1], dir[2]);
    if (!(w.direction.norm() > 0.0)) throw ConfigError("plane_wave.direction must be nonzero");
    w.direction.normalize();
    const json& pol = p.at("polarization");
    if (!pol.is_array() || pol.size() != 3) throw ConfigError("plane_wave.polarization must have 3 entries");
    for (int i = 0; i < 3; ++i) w.polarization[i] = cfrom(pol[i], "plane_wave.polarization entry");
    if (p.contains("amplitude")) w.amplitude = cfrom(p["amplitude"], "plane_wave.amplitude");
    c.plane_wave = w;
  }
  if (j.contains("synthesis")) {
    const json& s = j["synthesis"];
    reject_unknown(s, {"target", "threshold", "max_iterations", "sigma", "scatter", "xpr_theta"},
                   "synthesis");
    if (s.contains("target")) {
      const auto t = s["target"].get<std::string>();
      if (t == "left") {
        c.synthesis.target = target_left();
      } else if (t == "right") {
        c.synthesis.target = target_right();
      } else {
        throw ConfigError("synthesis.target must be 'left' or 'right'");
      }
    }
    if (s.contains("threshold")) c.synthesis.threshold = number(s["threshold"], "synthesis.threshold");
    if (s.contains("max_iterations")) {
      c.synthesis.max_iterations = integer(s["max_iterations"], "synthesis.max_iterations");
    }
    if (s.contains("sigma")) {
      for (const auto& x : s["sigma"]) c.synthesis.sigma.push_back(cfrom(x, "synthesis.sigma entry"));
    }
    if (s.contains("scatter")) {
      const auto t = s["scatter"].get<std::string>();
      if (t == "outgoing") {
        c.synthesis.scatter = ScatterTerm::Outgoing;
      } else if (t == "literal") {
        c.synthesis.scatter = ScatterTerm::Literal;
      } else {
        throw ConfigError("synthesis.scatter must be 'outgoing' or 'literal'");
      }
    }
    if (s.contains("xpr_theta")) {
      const auto r = s["xpr_theta"].get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("synthesis.xpr_theta must be [min, max]");
      c.synthesis.theta_min = r[0];
      c.synthesis.theta_max = r[1];
    }
  }
  if (j.contains("cuts")) {
    for (const auto& x : j["cuts"]) {
      reject_unknown(x, {"phi_deg", "theta_start", "theta_stop", "count"}, "cuts entry");
      CutConfig cc;
      if (x.contains("phi_deg")) cc.phi_deg = number(x["phi_deg"], "cut phi_deg");
      if (x.contains("theta_start")) cc.theta_start = number(x["theta_start"], "cut theta_start");
      if (x.contains("theta_stop")) cc.theta_stop = number(x["theta_stop"], "cut theta_stop");
      if (x.contains("count")) cc.count = integer(x["count"], "cut count");
      c.cuts.push_back(cc);
    }
  } else {
    c.cuts = {CutConfig{0.0}, CutConfig{90.0}};
  }
  if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>(), base_dir);
  return c;
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) throw ConfigError("--config is required");
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path);
  try {
    return parse_config(read_file(path), fs::path(path).parent_path().string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

int exit_code_for(const Error& e) {
  static const std::set<std::string> input = {"config", "geometry", "format", "index", "dimension"};
  return input.count(e.kind()) ? 2 : 3;
}

namespace {

// Everything a command may need, built lazily in pipeline order.
struct Pipeline {
  const RunConfig& cfg;
  const CliOptions& opt;
  fs::path out_dir;
  WireGeometry geometry;
  std::shared_ptr<WireMesh> mesh;
  ImpedanceMatrix z;
  std::vector<CharacteristicBasis> bases;
  std::vector<Gsm> gsms;
  ModalCouplingMatrix g;

  Pipeline(const RunConfig& c, const CliOptions& o, fs::path dir)
      : cfg(c), opt(o), out_dir(std::move(dir)) {}

  void build_mesh() {
    geometry = cfg.builtin ? builtin_geometry(*cfg.builtin, cfg.frequency_hz)
                           : load_geometry(cfg.geometry_file);
    mesh = std::make_shared<WireMesh>(geometry);
    z = assemble_impedance(*mesh, cfg.frequency_hz);
  }

  void build_modes() {
    build_mesh();
    for (int id : mesh->element_ids()) {
      const WireMesh em = mesh->element_mesh(id);
      const ImpedanceMatrix zk = extract_block(z, id, id);
      const int n = cfg.modes_per_element == 0 ? em.basis_count() : cfg.modes_per_element;
      bases.push_back(compute_characteristic_modes(zk, n, em));
    }
  }

  void build_coupling() {
    build_modes();
    for (std::size_t k = 0; k < bases.size(); ++k) {
      const int id = bases[k].element_id;
      const ImpedanceMatrix zk = extract_block(z, id, id);
      gsms.push_back(measured_element_gsm(bases[k], zk, mesh->element_mesh(id).port_basis(),
                                          cfg.reference_impedance));
    }
    g = opt.no_coupling ? zero_coupling(bases) : assemble_coupling(bases, z);
  }

  ArrayModel model() const {
    ArrayModel m;
    m.elements = gsms;
    m.coupling = g;
    m.bases = bases;
    return m;
  }

  VectorXcd drive() const {
    const int p = mesh->port_count();
    VectorXcd v(p);
    if (cfg.drive_mode == "uniform") {
      v.setOnes();
    } else if (cfg.drive_mode == "random") {
      // Raw engine output mapped by hand so the sequence is library independent.
      std::mt19937_64 rng(cfg.seed);
      auto u = [&] { return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0; };
      for (int i = 0; i < p; ++i) {
        const double re = u();
        const double im = u();
        v[i] = cd(re, im);
      }
    } else if (cfg.drive_mode == "list") {
      if (static_cast<int>(cfg.drive.size()) != p) {
        throw ConfigError("drive has " + std::to_string(cfg.drive.size()) + " entries, the layout has " +
                          std::to_string(p) + " ports");
      }
      for (int i = 0; i < p; ++i) v[i] = cfg.drive[i];
    } else {
      const MatrixXcd m = io::load_matrix(cfg.drive_file).values;
      if (m.cols() != 1 || m.rows() != p) {
        throw ConfigError("drive file must hold a " + std::to_string(p) + " x 1 column");
      }
      v = m.col(0);
    }
    return v;
  }

  VectorXcd external() const {
    VectorXcd a = VectorXcd::Zero(g.total_modes());
    if (!cfg.plane_wave) return a;
    for (std::size_t k = 0; k < bases.size(); ++k) {
      a.segment(g.offset(static_cast<int>(k)), bases[k].mode_count()) =
          external_incidence(bases[k], *cfg.plane_wave);
    }
    return a;
  }

  std::vector<CutSpec> cuts() const {
    std::vector<CutSpec> out;
    for (const auto& c : cfg.cuts) {
      out.push_back(CutSpec::uniform(c.phi_deg, c.theta_start, c.theta_stop, c.count));
    }
    return out;
  }

  json provenance() const {
    json o;
    o["no_coupling"] = opt.no_coupling;
    o["oracle"] = opt.oracle;
    o["modes_per_element"] = cfg.modes_per_element;
    o["seed"] = cfg.seed;
    o["drive"] = cfg.drive_mode;
    if (opt.max_iter) o["max_iter"] = *opt.max_iter;
    json p;
    p["tool"] = "cmsynth";
    p["version"] = kVersion;
    p["command"] = opt.command;
    p["config_hash"] = "fnv1a64:" + cfg.hash;
    p["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                 "." + std::to_string(EIGEN_MINOR_VERSION);
    p["options"] = o;
    return p;
  }

  void write_json(const std::string& name, json j) const {
    j["provenance"] = provenance();
    write_file(out_dir / name, j.dump(2) + "\n");
  }

  void write_json_text(const std::string& name, const std::string& text) const {
    write_json(name, json::parse(text));
  }

  json element_table() const {
    json a = json::array();
    for (int id : mesh->element_ids()) {
      const auto [first, count] = mesh->element_basis_range(id);
      a.push_back({{"element", id},
                   {"first_basis", first},
                   {"basis_count", count},
                   {"ports", mesh->element_ports(id)}});
    }
    return a;
  }
};

json port_block(const VectorXcd& v, const VectorXcd& w, double zref) {
  const double sz = std::sqrt(zref);
  const VectorXcd i = (v - w) / sz;
  const VectorXcd u = (v + w) * sz;
  VectorXcd zin(v.size());
  for (Eigen::Index p = 0; p < v.size(); ++p) {
    zin[p] = std::abs(i[p]) > 0.0 ? u[p] / i[p] : cd(std::nan(""), std::nan(""));
  }
  const double pin = 0.5 * (u.array() * i.conjugate().array()).real().sum();
  return {{"incident", cvec(v)},
          {"reflected", cvec(w)},
          {"currents", cvec(i)},
          {"voltages", cvec(u)},
          {"active_impedance", cvec(zin)},
          {"input_power_w", pin}};
}

double rel_err(const VectorXcd& a, const VectorXcd& ref) {
  const double d = ref.norm();
  return d > 0.0 ? (a - ref).norm() / d : (a - ref).norm();
}

int cmd_assemble(Pipeline& p, std::ostream& out) {
  p.build_mesh();
  io::save_matrix((p.out_dir / "impedance.txt").string(), p.z.entries, p.cfg.frequency_hz);
  json j;
  j["frequency_hz"] = p.cfg.frequency_hz;
  j["basis_count"] = p.mesh->basis_count();
  j["port_count"] = p.mesh->port_count();
  j["ground_plane"] = p.geometry.ground.has_value();
  j["elements"] = p.element_table();
  j["symmetry_residual"] = (p.z.entries - p.z.entries.transpose()).norm() / p.z.entries.norm();
  j["matrix_file"] = "impedance.txt";
  p.write_json("assemble.json", j);
  write_file(p.out_dir / "geometry.json", geometry_to_json(p.geometry));
  out << "assembled " << p.mesh->basis_count() << " x " << p.mesh->basis_count()
      << " impedance matrix over " << p.mesh->element_ids().size() << " element(s)\n";
  return 0;
}

int cmd_modes(Pipeline& p, std::ostream& out) {
  p.build_modes();
  json els = json::array();
  out << "element mode lambda |lambda| significance\n";
  for (const auto& b : p.bases) {
    const std::string stem = "basis_e" + std::to_string(b.element_id);
    io::save_matrix((p.out_dir / (stem + ".txt")).string(), b.eigencurrents.cast<cd>(), b.frequency_hz);
    p.write_json_text(stem + ".json", basis_sidecar_json(b));
    json modes = json::array();
    for (int n = 0; n < b.mode_count(); ++n) {
      const double lam = b.eigenvalues[n];
      const double ms = 1.0 / std::abs(1.0 + kJ * lam);
      modes.push_back({{"mode", n + 1},
                       {"lambda", lam},
                       {"abs_lambda", std::abs(lam)},
                       {"modal_significance", ms},
                       {"s", cjson(eigenvalue_to_scattering(lam))}});
      char line[128];
      std::snprintf(line, sizeof line, "%d %d %.6g %.6g %.4f\n", b.element_id, n + 1, lam,
                    std::abs(lam), ms);
      out << line;
    }
    els.push_back({{"element", b.element_id},
                   {"basis_count", b.basis_count()},
                   {"regularization", b.regularization},
                   {"min_real_eigenvalue", b.min_real_eigenvalue},
                   {"matrix_file", stem + ".txt"},
                   {"modes", modes}});
    for (const auto& cut : p.cuts()) {
      for (int n = 0; n < b.mode_count(); ++n) {
        write_file(p.out_dir / (stem + "_m" + std::to_string(n + 1) + "_" + phi_tag(cut.phi_deg) + ".csv"),
                   cut_to_csv(mode_farfield(b, n, cut)));
      }
    }
  }
  json j;
  j["frequency_hz"] = p.cfg.frequency_hz;
  j["elements"] = els;
  p.write_json("modes.json", j);
  return 0;
}

int cmd_couple(Pipeline& p, std::ostream& out) {
  p.build_coupling();
  p.write_json_text("coupling.json", coupling_to_json(p.g));
  for (std::size_t k = 0; k < p.gsms.size(); ++k) {
    p.write_json_text("gsm_e" + std::to_string(p.bases[k].element_id) + ".json", gsm_to_json(p.gsms[k]));
  }
  const ArrayModel m = p.model();
  const CoupledBlocks c = couple(m);
  json norms = json::array();
  for (const auto& [kl, b] : p.g.blocks) {
    norms.push_back({{"k", p.bases[kl.first].element_id}, {"l", p.bases[kl.second].element_id}, {"norm", b.norm()}});
  }
  const double rho = coupling_spectral_radius(m);
  json j;
  j["frequency_hz"] = p.cfg.frequency_hz;
  j["spectral_radius"] = rho;
  j["rcond"] = c.rcond;
  j["block_norms"] = norms;
  j["coupled_gamma"] = io::format_matrix(c.Gamma, p.cfg.frequency_hz);
  p.write_json("couple.json", j);
  out << "coupling over " << p.bases.size() << " element(s), spectral radius " << fixed2(rho) << "\n";
  return 0;
}

json oracle_block(Pipeline& p, const VectorXcd& v, const CoupledSolution& s) {
  const DirectSolution d = direct_solve_oracle(*p.mesh, p.z, v, p.cfg.reference_impedance);
  const auto cur = element_currents(s.f, p.bases);
  VectorXcd all(p.mesh->basis_count());
  Eigen::Index off = 0;
  for (const auto& c : cur) {
    all.segment(off, c.size()) = c;
    off += c.size();
  }
  return {{"reflected", cvec(d.ports.reflected)},
          {"port_wave_rel_error", rel_err(s.w, d.ports.reflected)},
          {"current_rel_error", rel_err(all, d.ports.currents)}};
}

int cmd_solve(Pipeline& p, std::ostream& out) {
  if (p.opt.oracle && p.cfg.plane_wave) {
    throw ConfigError("--oracle compares port drives only; remove plane_wave");
  }
  p.build_coupling();
  const VectorXcd v = p.drive();
  const VectorXcd a = p.external();
  const CoupledSolution s = solve_excitation(p.model(), v, a);
  json j;
  j["frequency_hz"] = p.cfg.frequency_hz;
  j["no_coupling"] = p.opt.no_coupling;
  j["ports"] = port_block(v, s.w, p.cfg.reference_impedance);
  j["modal_outgoing"] = cvec(s.f);
  if (p.cfg.plane_wave) j["modal_incident_external"] = cvec(a);
  j["modal_residual"] = s.modal_residual;
  j["port_residual"] = s.port_residual;
  j["rcond"] = s.blocks.rcond;
  j["coupled_gamma"] = io::format_matrix(s.blocks.Gamma, p.cfg.frequency_hz);
  json files = json::array();
  for (const auto& cut : p.cuts()) {
    const std::string name = "pattern_" + phi_tag(cut.phi_deg) + ".csv";
    write_file(p.out_dir / name, cut_to_csv(array_farfield(s.f, p.bases, cut)));
    files.push_back(name);
  }
  j["patterns"] = files;
  if (p.opt.oracle) {
    const json o = oracle_block(p, v, s);
    j["oracle"] = o;
    out << "oracle port-wave relative error " << io::format_double(o["port_wave_rel_error"].get<double>())
        << "\n";
  }
  p.write_json("solve.json", j);
  out << "solved " << v.size() << " port(s), " << s.f.size() << " modal coefficient(s)\n";
  return 0;
}

int cmd_oracle(Pipeline& p, std::ostream& out) {
  if (p.cfg.plane_wave) throw ConfigError("oracle drives ports only; remove plane_wave");
  p.build_mesh();
  const VectorXcd v = p.drive();
  const DirectSolution d = direct_solve_oracle(*p.mesh, p.z, v, p.cfg.reference_impedance);
  json j;
  j["frequency_hz"] = p.cfg.frequency_hz;
  j["ports"] = port_block(v, d.ports.reflected, p.cfg.reference_impedance);
  j["radiated_power_w"] = radiated_power(d.ports.currents, *p.mesh, p.cfg.frequency_hz);
  j["basis_currents"] = cvec(d.ports.currents);
  json files = json::array();
  for (const auto& cut : p.cuts()) {
    const std::string name = "oracle_" + phi_tag(cut.phi_deg) + ".csv";
    write_file(p.out_dir / name, cut_to_csv(radiate(d.ports.currents, *p.mesh, p.cfg.frequency_hz, cut)));
    files.push_back(name);
  }
  j["patterns"] = files;
  p.write_json("oracle.json", j);
  out << "direct solve over " << p.mesh->basis_count() << " basis functions, input power "
      << io::format_double(j["ports"]["input_power_w"].get<double>()) << " W\n";
  return 0;
}

int cmd_synth(Pipeline& p, std::ostream& out) {
  if (p.cfg.modes_per_element != 2) throw ConfigError("synthesis needs modes_per_element = 2");
  p.build_modes();
  p.g = p.opt.no_coupling ? zero_coupling(p.bases) : assemble_coupling(p.bases, p.z);
  const auto& s = p.cfg.synthesis;
  SynthesisConfig sc;
  sc.target = s.target;
  sc.threshold = s.threshold;
  sc.max_iterations = p.opt.max_iter.value_or(s.max_iterations);
  sc.sigma = s.sigma;
  sc.scatter = s.scatter;
  try {
    sc.validate(p.g.element_count);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const SynthesisResult r = synthesize(p.g, sc);

  json j = json::parse(synthesis_to_json(r));
  j["scatter"] = s.scatter == ScatterTerm::Outgoing ? "outgoing" : "literal";
  json cuts = json::array();
  XprReport rep;
  bool first = true;
  for (const auto& cut : p.cuts()) {
    rep = evaluate_result(r, p.g, p.bases, cut, s.theta_min, s.theta_max);
    const std::string tag = phi_tag(cut.phi_deg);
    write_file(p.out_dir / ("pattern_initial_" + tag + ".csv"),
               cut_to_csv(array_farfield(rep.f_initial, p.bases, cut)));
    write_file(p.out_dir / ("pattern_synth_" + tag + ".csv"),
               cut_to_csv(array_farfield(rep.f_final, p.bases, cut)));
    cuts.push_back({{"phi_deg", cut.phi_deg},
                    {"field_initial_db", rep.field_initial_db},
                    {"field_final_db", rep.field_final_db}});
    if (first) {
      out << "field XPR (" << tag << ") " << fixed2(rep.field_initial_db) << " dB -> "
          << fixed2(rep.field_final_db) << " dB\n";
      first = false;
    }
  }
  double worst = 0.0;
  for (double e : rep.plugback_error) worst = std::max(worst, e);
  j["xpr"] = {{"modal_initial_db", rep.modal_initial_db},
              {"modal_final_db", rep.modal_final_db},
              {"theta_range_deg", {s.theta_min, s.theta_max}},
              {"cuts", cuts},
              {"plugback_error", rep.plugback_error},
              {"plugback_error_max", worst}};
  p.write_json("synthesis.json", j);
  out << (r.converged ? "converged" : "not converged") << " after " << r.iterations
      << " iteration(s); modal XPR " << fixed2(rep.modal_initial_db) << " dB -> "
      << fixed2(rep.modal_final_db) << " dB\n";
  return 0;
}

json error_json(const std::string& kind, const std::string& message,
                std::optional<double> diagnostic) {
  json e = {{"kind", kind}, {"message", message}};
  if (diagnostic) e["diagnostic"] = *diagnostic;
  return {{"error", e}};
}

}  // namespace

int run_command(const CliOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    static const std::set<std::string> commands = {"modes", "assemble", "couple",
                                                   "solve", "synth",    "oracle"};
    if (!commands.count(opt.command)) throw ConfigError("unknown command '" + opt.command + "'");
    if (opt.n_modes && *opt.n_modes < 1) throw ConfigError("--n-modes must be at least 1");
    if (opt.max_iter && *opt.max_iter < 1) throw ConfigError("--max-iter must be at least 1");

    RunConfig cfg = load_config(opt.config_path);
    if (opt.n_modes) cfg.modes_per_element = *opt.n_modes;
    if (opt.seed) {
      cfg.seed = *opt.seed;
      if (cfg.drive_mode == "uniform") cfg.drive_mode = "random";
    }
    if (opt.drive_path) {
      cfg.drive_mode = "file";
      cfg.drive_file = *opt.drive_path;
    }
    if (const char* env = std::getenv("CMSYNTH_OUT_DIR"); env && *env) cfg.output_dir = env;
    if (opt.out) cfg.output_dir = *opt.out;
    cfg.validate();

    fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());

    Pipeline p(cfg, opt, dir);
    if (opt.command == "assemble") return cmd_assemble(p, out);
    if (opt.command == "modes") return cmd_modes(p, out);
    if (opt.command == "couple") return cmd_couple(p, out);
    if (opt.command == "solve") return cmd_solve(p, out);
    if (opt.command == "oracle") return cmd_oracle(p, out);
    return cmd_synth(p, out);
  } catch (const NumericalError& e) {
    err << error_json(e.kind(), e.what(), e.diagnostic()).dump() << "\n";
    return exit_code_for(e);
  } catch (const Error& e) {
    err << error_json(e.kind(), e.what(), std::nullopt).dump() << "\n";
    return exit_code_for(e);
  } catch (const json::exception& e) {
    err << error_json("format", e.what(), std::nullopt).dump() << "\n";
    return 2;
  }
}

}  // namespace cmsynth
