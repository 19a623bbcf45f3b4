#include "cmsynth/layouts.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace cmsynth {

using json = nlohmann::json;

void add_dipole(WireGeometry& g, const DipoleSpec& spec) {
  if (spec.segments < 2 || spec.segments % 2 != 0) {
    throw GeometryError("dipole needs an even segment count >= 2");
  }
  if (!(spec.length > 0.0)) throw GeometryError("dipole length must be positive");
  if (!g.segments.empty() && g.segments.back().element_id > spec.element_id) {
    throw GeometryError("dipoles must be added in nondecreasing element order");
  }
  const Vec3 axis = spec.axis.normalized();
  const Vec3 a = spec.center - 0.5 * spec.length * axis;
  int local = 0;
  for (const auto& s : g.segments) local += s.element_id == spec.element_id;
  for (int i = 0; i < spec.segments; ++i) {
    Segment s;
    s.start = a + (spec.length * i / spec.segments) * axis;
    s.end = a + (spec.length * (i + 1) / spec.segments) * axis;
    s.radius = spec.radius;
    s.element_id = spec.element_id;
    g.segments.push_back(s);
  }
  if (spec.fed) g.ports.push_back({spec.element_id, local + spec.segments / 2 - 1});
}

void add_crossed_dipole(WireGeometry& g, const Vec3& center, double length,
                        double radius, int segments, int element_id) {
  DipoleSpec d;
  d.center = center;
  d.length = length;
  d.radius = radius;
  d.segments = segments;
  d.element_id = element_id;
  d.axis = Vec3::UnitX();
  add_dipole(g, d);
  d.axis = Vec3::UnitY();
  add_dipole(g, d);
}

namespace {

Vec3 to_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("point must be [x, y, z]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

WireGeometry geometry_from_json(const std::string& text) {
  WireGeometry g;
  try {
    const json j = json::parse(text);
    for (const auto& s : j.at("segments")) {
      Segment seg;
      seg.start = to_vec(s.at("start"));
      seg.end = to_vec(s.at("end"));
      seg.radius = s.at("radius").get<double>();
      seg.element_id = s.value("element", 0);
      g.segments.push_back(seg);
    }
    if (j.contains("ports")) {
      for (const auto& p : j.at("ports")) {
        g.ports.push_back({p.at("element").get<int>(), p.at("segment").get<int>()});
      }
    }
    if (j.contains("ground_plane") && !j.at("ground_plane").is_null()) {
      g.ground = GroundPlane{j.at("ground_plane").at("height").get<double>()};
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("geometry: ") + e.what());
  }
  return g;
}

std::string geometry_to_json(const WireGeometry& g) {
  json j;
  j["segments"] = json::array();
  for (const auto& s : g.segments) {
    j["segments"].push_back({{"start", {s.start.x(), s.start.y(), s.start.z()}},
                             {"end", {s.end.x(), s.end.y(), s.end.z()}},
                             {"radius", s.radius},
                             {"element", s.element_id}});
  }
  j["ports"] = json::array();
  for (const auto& p : g.ports) {
    j["ports"].push_back({{"element", p.element_id}, {"segment", p.segment}});
  }
  if (g.ground) j["ground_plane"] = {{"height", g.ground->height}};
  return j.dump(2) + "\n";
}

WireGeometry load_geometry(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read geometry file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return geometry_from_json(ss.str());
}

}  // namespace cmsynth
