#include "rod_sim.hpp"

#include "error.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace sketchrod {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 any_perpendicular(const Vec3& t) {
  const Vec3 axis = std::abs(t.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return t.cross(axis).normalized();
}

Frame make_frame(const Vec3& tangent, const Vec3& d1_hint) {
  Frame f;
  const Vec3 t = tangent.normalized();
  Vec3 d1 = d1_hint - d1_hint.dot(t) * t;
  d1 = d1.norm() > 1e-12 ? d1.normalized() : any_perpendicular(t);
  f.col(0) = t;
  f.col(1) = d1;
  f.col(2) = t.cross(d1);
  return f;
}

// Minimal rotation carrying frame f from its tangent onto `tangent`.
Frame transport(const Frame& f, const Vec3& tangent) {
  const Vec3 t_new = tangent.normalized();
  const Quat q = Quat::FromTwoVectors(f.col(0), t_new);
  return make_frame(t_new, q * Vec3(f.col(1)));
}

// d kappa_b / d e0 and d kappa_b / d e1 for kappa_b = 2 e0 x e1 / chi.
struct CurvatureJacobian {
  Vec3 kappa;
  Mat3 d_e0;
  Mat3 d_e1;
};

CurvatureJacobian curvature_jacobian(const Vec3& e0, const Vec3& e1) {
  const double l0 = e0.norm();
  const double l1 = e1.norm();
  const double chi = l0 * l1 + e0.dot(e1);
  CurvatureJacobian j;
  j.kappa = 2.0 * e0.cross(e1) / chi;
  j.d_e0 = (-2.0 * skew(e1) - j.kappa * (l1 / l0 * e0 + e1).transpose()) / chi;
  j.d_e1 = (2.0 * skew(e0) - j.kappa * (l0 / l1 * e1 + e0).transpose()) / chi;
  return j;
}

double bend_coefficient(const RodState& s, std::size_t interior, const RodParams& p) {
  return p.bend_stiffness / (2.0 * s.rest_voronoi[interior]);
}

}  // namespace

RodParams RodParams::defaults_for_radius(double radius) {
  RodParams p;
  p.radius = radius;
  p.bend_stiffness = 5e-3 * p.stretch_stiffness * radius * radius;
  return p;
}

void RodParams::validate() const {
  if (!(stretch_stiffness >= 0.0) || !(bend_stiffness >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "rod stiffnesses must be >= 0");
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "rod time step must be positive");
  if (substeps < 1) throw Error(ErrorCode::InvalidArgument, "rod substep count must be >= 1");
  if (!(damping >= 0.0)) throw Error(ErrorCode::InvalidArgument, "rod damping must be >= 0");
  if (!(density > 0.0) || !(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "rod density and radius must be positive");
  if (!gravity.allFinite()) throw Error(ErrorCode::InvalidArgument, "rod gravity must be finite");
}

Vec3 curvature_binormal(const Vec3& e0, const Vec3& e1) {
  return 2.0 * e0.cross(e1) / (e0.norm() * e1.norm() + e0.dot(e1));
}

RodState init_rod(const Polyline3D& poly, const RodParams& params) {
  params.validate();
  if (poly.size() < 2) throw Error(ErrorCode::Degenerate, "rod needs at least 2 vertices");
  const std::size_t n = poly.size();
  RodState s;
  s.positions = poly.vertices;
  s.rest_positions = poly.vertices;
  s.velocities.assign(n, Vec3::Zero());
  s.masses.assign(n, 0.0);
  const double linear_density = params.density * params.radius * params.radius;
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const Vec3 edge = poly.vertices[e + 1] - poly.vertices[e];
    const double len = edge.norm();
    if (!(len > 0.0)) throw Error(ErrorCode::Degenerate, "rod edge " + std::to_string(e) + " has zero length");
    s.rest_lengths.push_back(len);
    s.masses[e] += 0.5 * linear_density * len;
    s.masses[e + 1] += 0.5 * linear_density * len;
    s.edge_frames.push_back(e == 0 ? make_frame(edge, any_perpendicular(edge.normalized()))
                                   : transport(s.edge_frames.back(), edge));
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    s.rest_curvature.push_back(curvature_binormal(poly.vertices[i] - poly.vertices[i - 1],
                                                  poly.vertices[i + 1] - poly.vertices[i]));
    s.rest_voronoi.push_back(0.5 * (s.rest_lengths[i - 1] + s.rest_lengths[i]));
  }
  return s;
}

double stretch_energy(const RodState& state, const std::vector<Vec3>& x, const RodParams& params) {
  double e = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double rest = state.rest_lengths[i];
    const double strain = (x[i + 1] - x[i]).norm() / rest - 1.0;
    e += 0.5 * params.stretch_stiffness * rest * strain * strain;
  }
  return e;
}

double bending_energy(const RodState& state, const std::vector<Vec3>& x, const RodParams& params) {
  double e = 0.0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const Vec3 dk = curvature_binormal(x[i] - x[i - 1], x[i + 1] - x[i]) - state.rest_curvature[i - 1];
    e += bend_coefficient(state, i - 1, params) * dk.squaredNorm();
  }
  return e;
}

std::vector<Vec3> bending_gradient(const RodState& state, const std::vector<Vec3>& x, const RodParams& params) {
  std::vector<Vec3> g(x.size(), Vec3::Zero());
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const CurvatureJacobian j = curvature_jacobian(x[i] - x[i - 1], x[i + 1] - x[i]);
    const Vec3 dk = 2.0 * bend_coefficient(state, i - 1, params) * (j.kappa - state.rest_curvature[i - 1]);
    const Vec3 ga = j.d_e0.transpose() * dk;
    const Vec3 gb = j.d_e1.transpose() * dk;
    g[i - 1] -= ga;
    g[i] += ga - gb;
    g[i + 1] += gb;
  }
  return g;
}

double kinetic_energy(const RodState& state) {
  double e = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) e += 0.5 * state.masses[i] * state.velocities[i].squaredNorm();
  return e;
}

double total_energy(const RodState& state, const RodParams& params) {
  double gravity = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) gravity -= state.masses[i] * params.gravity.dot(state.positions[i]);
  return kinetic_energy(state) + stretch_energy(state, state.positions, params) +
         bending_energy(state, state.positions, params) + gravity;
}

void set_handle(RodState& state, const Handle& handle) {
  if (handle.vertex >= state.size())
    throw Error(ErrorCode::Bounds, "handle vertex " + std::to_string(handle.vertex) + " out of range");
  if (!handle.target.allFinite()) throw Error(ErrorCode::InvalidArgument, "handle target must be finite");
  state.handles[handle.vertex] = handle;
}

void release_handle(RodState& state, std::size_t vertex) {
  if (vertex >= state.size()) throw Error(ErrorCode::Bounds, "handle vertex " + std::to_string(vertex) + " out of range");
  state.handles.erase(vertex);
}

void reset_to_rest(RodState& state) {
  state.positions = state.rest_positions;
  state.velocities.assign(state.size(), Vec3::Zero());
  state.handles.clear();
  state.edge_frames.clear();
  for (std::size_t e = 0; e + 1 < state.size(); ++e) {
    const Vec3 edge = state.positions[e + 1] - state.positions[e];
    state.edge_frames.push_back(e == 0 ? make_frame(edge, any_perpendicular(edge.normalized()))
                                       : transport(state.edge_frames.back(), edge));
  }
}

void step(RodState& state, const RodParams& params) {
  params.validate();
  const std::size_t n = state.size();
  const std::size_t dofs = 3 * n;
  const double h = params.dt;

  // Constrained vertices and their positions at the start of this step.
  std::vector<int> free_index(dofs, -1);
  std::vector<std::pair<std::size_t, Vec3>> constrained;  // (vertex, start position)
  for (const auto& [v, handle] : state.handles) constrained.emplace_back(v, state.positions[v]);
  {
    int next = 0;
    std::vector<bool> fixed(n, false);
    for (const auto& c : constrained) fixed[c.first] = true;
    for (std::size_t v = 0; v < n; ++v)
      if (!fixed[v])
        for (int a = 0; a < 3; ++a) free_index[3 * v + a] = next++;
  }
  const int free_dofs = static_cast<int>(dofs - 3 * constrained.size());

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs(free_dofs);
  Eigen::VectorXd forces(dofs);
  Eigen::VectorXd vc = Eigen::VectorXd::Zero(dofs);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;

  for (int sub = 1; sub <= params.substeps; ++sub) {
    const double h2 = h * h;
    triplets.clear();

    // Prescribed velocities of handle vertices for this substep.
    for (const auto& [v, start] : constrained) {
      const Handle& handle = state.handles.at(v);
      const Vec3 target = sub == params.substeps
                              ? handle.target
                              : Vec3(start + (static_cast<double>(sub) / params.substeps) * (handle.target - start));
      vc.segment<3>(3 * v) = (target - state.positions[v]) / h;
    }

    // Forces: gravity, stretch, bending.
    for (std::size_t v = 0; v < n; ++v) forces.segment<3>(3 * v) = state.masses[v] * params.gravity;

    auto add_block = [&](std::size_t vi, std::size_t vj, const Mat3& block) {
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const double val = h2 * block(a, b);
          if (val == 0.0) continue;
          const int r = free_index[3 * vi + a];
          const int c = free_index[3 * vj + b];
          if (r < 0) continue;
          if (c >= 0) triplets.emplace_back(r, c, val);
          else rhs[r] -= val * vc[3 * vj + b];
        }
    };

    rhs.setZero();
    for (std::size_t v = 0; v < n; ++v) {
      const double m = state.masses[v];
      for (int a = 0; a < 3; ++a) {
        const int r = free_index[3 * v + a];
        if (r < 0) continue;
        triplets.emplace_back(r, r, m * (1.0 + h * params.damping));
      }
    }

    for (std::size_t e = 0; e + 1 < n; ++e) {
      const Vec3 edge = state.positions[e + 1] - state.positions[e];
      const double len = edge.norm();
      const double rest = state.rest_lengths[e];
      const Vec3 dir = edge / len;
      const double k = params.stretch_stiffness / rest;
      const Vec3 f = k * (len - rest) * dir;  // dE/d(edge)
      forces.segment<3>(3 * e) += f;
      forces.segment<3>(3 * (e + 1)) -= f;
      const Mat3 outer = dir * dir.transpose();
      const Mat3 hess = k * (outer + std::max(0.0, (len - rest) / len) * (Mat3::Identity() - outer));
      add_block(e, e, hess);
      add_block(e + 1, e + 1, hess);
      add_block(e, e + 1, -hess);
      add_block(e + 1, e, -hess);
    }

    for (std::size_t i = 1; i + 1 < n; ++i) {
      const CurvatureJacobian j = curvature_jacobian(state.positions[i] - state.positions[i - 1],
                                                     state.positions[i + 1] - state.positions[i]);
      const double c = bend_coefficient(state, i - 1, params);
      const Vec3 dk = 2.0 * c * (j.kappa - state.rest_curvature[i - 1]);
      const Mat3 jv[3] = {-j.d_e0, j.d_e0 - j.d_e1, j.d_e1};
      for (int a = 0; a < 3; ++a) {
        forces.segment<3>(3 * (i - 1 + a)) -= jv[a].transpose() * dk;
        for (int b = 0; b < 3; ++b) add_block(i - 1 + a, i - 1 + b, 2.0 * c * jv[a].transpose() * jv[b]);
      }
    }

    for (std::size_t v = 0; v < n; ++v)
      for (int a = 0; a < 3; ++a) {
        const int r = free_index[3 * v + a];
        if (r >= 0) rhs[r] += state.masses[v] * state.velocities[v][a] + h * forces[3 * v + a];
      }

    Eigen::VectorXd vfree;
    if (free_dofs > 0) {
      Eigen::SparseMatrix<double> system(free_dofs, free_dofs);
      system.setFromTriplets(triplets.begin(), triplets.end());
      solver.compute(system);
      if (solver.info() != Eigen::Success)
        throw Error(ErrorCode::Diverged, "rod solve failed at step " + std::to_string(state.steps));
      vfree = solver.solve(rhs);
    }

    std::vector<Vec3> previous = state.positions;
    for (std::size_t v = 0; v < n; ++v) {
      if (free_index[3 * v] >= 0) {
        for (int a = 0; a < 3; ++a) state.velocities[v][a] = vfree[free_index[3 * v + a]];
        state.positions[v] += h * state.velocities[v];
      }
    }
    for (const auto& [v, start] : constrained) {
      const Handle& handle = state.handles.at(v);
      const Vec3 target = sub == params.substeps
                              ? handle.target
                              : Vec3(start + (static_cast<double>(sub) / params.substeps) * (handle.target - start));
      state.velocities[v] = (target - previous[v]) / h;
      state.positions[v] = target;
    }

    for (std::size_t v = 0; v < n; ++v)
      if (!state.positions[v].allFinite() || !state.velocities[v].allFinite())
        throw Error(ErrorCode::Diverged, "rod simulation diverged at step " + std::to_string(state.steps));

    for (std::size_t e = 0; e + 1 < n; ++e)
      state.edge_frames[e] = transport(state.edge_frames[e], state.positions[e + 1] - state.positions[e]);
  }
  ++state.steps;
}

std::vector<Frame> vertex_frames(const RodState& state) {
  const std::size_t n = state.size();
  std::vector<Frame> out(n);
  if (n < 2) return out;
  out.front() = state.edge_frames.front();
  out.back() = state.edge_frames.back();
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = blend_frames(state.edge_frames[i - 1], state.edge_frames[i], 0.5);
  return out;
}

Polyline3D rod_polyline(const RodState& state) {
  Polyline3D poly;
  poly.vertices = state.positions;
  poly.frames = vertex_frames(state);
  return poly;
}

}  // namespace sketchrod
