#pragma once

#include "polyline_post.hpp"
#include "scene_io.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace sketchrod {

struct RodParams {
  double stretch_stiffness = 1e4;
  double bend_stiffness = 5e-3 * 1e4 * 0.01 * 0.01;
  double damping = 0.5;  // 1/s
  Vec3 gravity = Vec3(0.0, -9.81, 0.0);
  double dt = 1.0 / 480.0;  // substep length
  int substeps = 8;         // substeps per step()
  double density = 1000.0;
  double radius = 0.01;

  // Engineering defaults for a rod of the given radius.
  static RodParams defaults_for_radius(double radius);
  void validate() const;
};

enum class HandleKind { Pin, Drag };

struct Handle {
  HandleKind kind = HandleKind::Pin;
  std::size_t vertex = 0;
  Vec3 target = Vec3::Zero();
};

// Columns are (tangent, d1, d2).
using Frame = Mat3;

struct RodState {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<Frame> edge_frames;         // one per edge
  std::vector<double> rest_lengths;       // one per edge
  std::vector<Vec3> rest_curvature;       // one per interior vertex (vertex i at i - 1)
  std::vector<double> rest_voronoi;       // one per interior vertex
  std::vector<double> masses;             // one per vertex
  std::vector<Vec3> rest_positions;
  std::map<std::size_t, Handle> handles;  // keyed by vertex
  std::uint64_t steps = 0;

  std::size_t size() const { return positions.size(); }
};

// Throws Degenerate for fewer than 2 vertices or a zero-length edge.
RodState init_rod(const Polyline3D& poly, const RodParams& params);

// Advances params.substeps substeps of params.dt. Drag targets are approached
// linearly over the substeps. Throws Diverged when positions become non-finite.
void step(RodState& state, const RodParams& params);

// Interior vertex frame = normalized quaternion average of the adjacent edge
// frames; endpoints copy their edge frame.
std::vector<Frame> vertex_frames(const RodState& state);

// Throws Bounds on an invalid vertex. Registering a handle on a vertex that
// already has one replaces it.
void set_handle(RodState& state, const Handle& handle);
void release_handle(RodState& state, std::size_t vertex);

// Puts the rod back in its rest configuration, dropping handles.
void reset_to_rest(RodState& state);

// Curvature binormal 2 (e0 x e1) / (|e0||e1| + e0 . e1).
Vec3 curvature_binormal(const Vec3& e0, const Vec3& e1);

double stretch_energy(const RodState& state, const std::vector<Vec3>& positions, const RodParams& params);
double bending_energy(const RodState& state, const std::vector<Vec3>& positions, const RodParams& params);
// Analytic dE_bend/dx.
std::vector<Vec3> bending_gradient(const RodState& state, const std::vector<Vec3>& positions, const RodParams& params);
double kinetic_energy(const RodState& state);
// Kinetic + stretch + bending + gravitational potential.
double total_energy(const RodState& state, const RodParams& params);

// Polyline snapshot (positions + vertex frames) for skinning and transport.
Polyline3D rod_polyline(const RodState& state);

}  // namespace sketchrod
