#pragma once

// Pipeline plumbing behind the cmsynth command line: run configuration,
// builtin layouts and the six commands.
//
// Config document (JSON; lengths of builtins in wavelengths):
//
//   {
//     "geometry": {"builtin": "grid3x3-crossed", "spacing": 0.56,
//                  "length": 0.47, "segments": 10, "radius": 0.001,
//                  "height": 0.1}                 or {"file": "geom.json"},
//     "frequency_hz": 3e8,
//     "modes_per_element": 2,                      (integer or "all")
//     "reference_impedance": 50,
//     "drive": [[re, im], ...] | "random" | "uniform",
//     "drive_file": "v.txt",                       (matrix text column)
//     "seed": 1,
//     "plane_wave": {"direction": [x,y,z], "polarization": [[re,im] x3],
//                    "amplitude": [re, im]},
//     "synthesis": {"target": "left" | "right", "threshold": 0.01,
//                   "max_iterations": 100, "sigma": [[re, im], ...],
//                   "scatter": "outgoing" | "literal",
//                   "xpr_theta": [-30, 30]},
//     "cuts": [{"phi_deg": 0, "theta_start": -90, "theta_stop": 90,
//               "count": 181}],
//     "output_dir": "cmsynth_out"
//   }
//
// CMSYNTH_OUT_DIR overrides output_dir; --out overrides both.

#include "cmsynth/common.hpp"
#include "cmsynth/mom_kernel.hpp"
#include "cmsynth/synthesis.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cmsynth {

inline constexpr const char* kVersion = "1.0.0";

struct BuiltinLayout {
  std::string name;  // dipole | crossed-dipole | dipole-pair | grid3x3-crossed
  double spacing = 0.56;
  double length = 0.47;
  int segments = 10;
  double radius = 0.001;
  double height = 0.0;  // > 0 puts a ground plane at z = 0
};

// Builtin defaults for `name`, before any config overrides.
BuiltinLayout builtin_defaults(const std::string& name);
WireGeometry builtin_geometry(const BuiltinLayout& layout, double frequency_hz);

struct CutConfig {
  double phi_deg = 0.0;
  double theta_start = -90.0;
  double theta_stop = 90.0;
  int count = 181;
};

struct SynthSettings {
  Eigen::Vector2cd target = target_left();
  double threshold = 0.01;
  int max_iterations = 100;
  std::vector<cd> sigma;
  ScatterTerm scatter = ScatterTerm::Outgoing;
  double theta_min = -30.0;
  double theta_max = 30.0;
};

struct RunConfig {
  std::optional<BuiltinLayout> builtin;
  std::string geometry_file;
  double frequency_hz = 3e8;
  int modes_per_element = 2;  // 0 keeps every mode
  double reference_impedance = 50.0;
  std::string drive_mode = "uniform";  // uniform | random | list | file
  std::vector<cd> drive;
  std::string drive_file;
  std::uint64_t seed = 1;
  std::optional<PlaneWave> plane_wave;
  SynthSettings synthesis;
  std::vector<CutConfig> cuts;
  std::string output_dir = "cmsynth_out";
  std::string hash;  // FNV-1a 64 of the canonical config text

  void validate() const;
};

// Relative paths are resolved against base_dir.
RunConfig parse_config(const std::string& text, const std::string& base_dir);
RunConfig load_config(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);

struct CliOptions {
  std::string command;
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> drive_path;
  std::optional<int> max_iter;
  std::optional<int> n_modes;
  bool no_coupling = false;
  bool oracle = false;
};

// Runs one command. Writes files under the output directory, a short report
// to `out`, and on failure an error document to `err`. Returns the exit code.
int run_command(const CliOptions& options, std::ostream& out, std::ostream& err);

// 2 for input problems, 3 for numerical failures.
int exit_code_for(const Error& e);

}  // namespace cmsynth
