#pragma once

// Geometry builders and the JSON geometry file format.
//
//   {
//     "segments": [{"start": [x,y,z], "end": [x,y,z], "radius": r,
//                   "element": id}, ...],
//     "ports": [{"element": id, "segment": local_index}, ...],
//     "ground_plane": {"height": z}            (optional)
//   }
//
// Lengths in meters.

#include "cmsynth/mom_kernel.hpp"

#include <string>

namespace cmsynth {

struct DipoleSpec {
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double length = 0.0;
  double radius = 0.0;
  int segments = 10;  // even, so a node sits at the center
  int element_id = 0;
  bool fed = true;
};

// Appends a straight center-fed dipole to `g` (port at the center node).
void add_dipole(WireGeometry& g, const DipoleSpec& spec);

// Two orthogonal dipoles sharing a center, both fed: arm 1 along x (port 1),
// arm 2 along y (port 2). One element.
void add_crossed_dipole(WireGeometry& g, const Vec3& center, double length,
                        double radius, int segments, int element_id);

WireGeometry geometry_from_json(const std::string& text);
std::string geometry_to_json(const WireGeometry& g);
WireGeometry load_geometry(const std::string& path);

}  // namespace cmsynth
