#pragma once

// Thin-wire EFIE method of moments with piecewise-sinusoidal Galerkin
// basis functions. Each basis lives on two consecutive segments of one
// wire and peaks (value 1) at their shared node; current flows from a
// segment's start point to its end point.

#include "cmsynth/common.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cmsynth {

struct Segment {
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  double radius = 0.0;
  int element_id = 0;
};

// Delta-gap feed at the end node of an element's `segment`-th segment
// (index local to the element, in listing order).
struct PortRef {
  int element_id = 0;
  int segment = 0;
};

// Infinite PEC plane z = height; the structure must sit strictly above it.
struct GroundPlane {
  double height = 0.0;
};

struct WireGeometry {
  std::vector<Segment> segments;
  std::vector<PortRef> ports;
  std::optional<GroundPlane> ground;
};

struct BasisFunction {
  int rise_segment = -1;  // global segment index, sin(k l)/sin(k d) half
  int fall_segment = -1;  // global segment index, sin(k (d - l))/sin(k d) half
  int element_id = 0;
};

// Validated geometry plus its basis functions. Segments must be listed
// grouped by element (nondecreasing element id); consecutive segments of the
// same element that share a node form one wire. There are no junctions.
class WireMesh {
 public:
  WireMesh() = default;
  explicit WireMesh(WireGeometry geometry);

  const WireGeometry& geometry() const { return geometry_; }
  const std::vector<BasisFunction>& basis() const { return basis_; }
  int basis_count() const { return static_cast<int>(basis_.size()); }
  int port_count() const { return static_cast<int>(port_basis_.size()); }

  // Sorted distinct element ids.
  const std::vector<int>& element_ids() const { return element_ids_; }
  // Basis index of each port, in port order.
  const std::vector<int>& port_basis() const { return port_basis_; }
  // Element id of each basis function.
  std::vector<int> basis_elements() const;
  // Contiguous basis range [first, first + count) of one element.
  std::pair<int, int> element_basis_range(int element_id) const;
  // Ports belonging to one element, as indices into port_basis().
  std::vector<int> element_ports(int element_id) const;

  // The element alone (its segments, its ports, the same ground plane).
  WireMesh element_mesh(int element_id) const;

 private:
  WireGeometry geometry_;
  std::vector<BasisFunction> basis_;
  std::vector<int> element_ids_;
  std::vector<int> port_basis_;
};

struct ImpedanceMatrix {
  MatrixXcd entries;
  double frequency_hz = 0.0;
  std::vector<int> row_elements;  // element id of each row basis
  std::vector<int> col_elements;  // element id of each column basis
  std::optional<std::pair<int, int>> block_index;
};

ImpedanceMatrix assemble_impedance(const WireMesh& mesh, double frequency_hz);
// Same, with the ground plane taken from the argument instead of the mesh.
ImpedanceMatrix assemble_impedance(const WireGeometry& geometry,
                                   double frequency_hz,
                                   std::optional<GroundPlane> ground);

// Rows of element k, columns of element l.
ImpedanceMatrix extract_block(const ImpedanceMatrix& z, int k, int l);

struct PortSolution {
  VectorXcd currents;       // basis coefficients
  VectorXcd port_currents;  // current through each gap
  VectorXcd port_voltages;  // gap voltage
  VectorXcd reflected;      // outgoing power waves w
};

// Port p is a Thevenin source 2 v_p sqrt(zref) in series with zref; the
// outgoing wave is w = v - sqrt(zref) I_port.
PortSolution port_drive_solve(const ImpedanceMatrix& z,
                              const std::vector<int>& port_basis,
                              const VectorXcd& incident, double zref);
// Currents for unit drive on each port in turn (one column per port).
MatrixXcd port_drive_columns(const ImpedanceMatrix& z,
                             const std::vector<int>& port_basis, double zref);

// Far field F with E = F exp(-jkr)/r.
struct FarFieldSample {
  cd e_theta;
  cd e_phi;
};

struct CutSpec {
  double phi_deg = 0.0;
  std::vector<double> theta_deg;

  static CutSpec uniform(double phi_deg, double theta_start, double theta_stop,
                         int count);
};

struct FarFieldCut {
  double phi_deg = 0.0;
  std::vector<double> theta_deg;
  std::vector<cd> e_theta;
  std::vector<cd> e_phi;
  double frequency_hz = 0.0;
  std::string label;
};

FarFieldSample far_field(const VectorXcd& currents, const WireMesh& mesh,
                         double frequency_hz, double theta, double phi);
FarFieldCut radiate(const VectorXcd& currents, const WireMesh& mesh,
                    double frequency_hz, const CutSpec& cut,
                    std::string label = {});

// Power radiated through the sphere (upper hemisphere with a ground plane),
// Gauss-Legendre in theta times uniform in phi.
double radiated_power(const VectorXcd& currents, const WireMesh& mesh,
                      double frequency_hz, int n_theta = 64, int n_phi = 128);

// E_inc(r) = amplitude * polarization * exp(-j k direction . r).
struct PlaneWave {
  Vec3 direction = Vec3(0, 0, -1);  // propagation direction
  Eigen::Vector3cd polarization = Eigen::Vector3cd(1, 0, 0);
  cd amplitude = 1.0;
};

// Tested incident field V_m = <f_m, E_inc>; includes the reflected wave when
// the mesh has a ground plane.
VectorXcd plane_wave_excitation(const WireMesh& mesh, double frequency_hz,
                                const PlaneWave& wave);

}  // namespace cmsynth
