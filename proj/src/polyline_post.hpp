#pragma once

#include "scene_io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sketchrod {

// Ordered 3D vertex chain. `frames` is either empty or holds one orthonormal
// frame per vertex with columns (tangent, normal, binormal).
struct Polyline3D {
  std::vector<Vec3> vertices;
  double target_edge = 0.0;
  std::vector<Mat3> frames;

  std::size_t size() const { return vertices.size(); }
  double length() const;
};

struct PolylinePoint {
  std::size_t segment = 0;
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
};

// Nearest point on the polyline; ties go to the lower segment index.
PolylinePoint nearest_on_polyline(const Polyline3D& poly, const Vec3& q);

Polyline3D chain_to_polyline(const GaussianScene& scene, const std::vector<std::uint32_t>& chain);

// v <- v + lambda * ((v_prev + v_next) / 2 - v) for interior vertices, applied
// synchronously `iterations` times. Endpoints never move.
Polyline3D laplacian_smooth(const Polyline3D& poly, int iterations, double lambda);

// Resamples to round(L / edge_len) equal-length chords from the first to the
// last vertex; endpoints are preserved exactly.
Polyline3D resample_uniform(const Polyline3D& poly, double edge_len);

// Primitives whose center lies strictly within `radius` of the polyline.
std::vector<std::uint32_t> segment_primitives(const GaussianScene& scene, const Polyline3D& poly, double radius);

struct SkinBinding {
  struct Entry {
    std::uint32_t primitive = 0;
    std::size_t segment = 0;
    double t = 0.0;
    Vec3 offset = Vec3::Zero();  // center - nearest point, in the rest frame at t
    Quat rest_frame = Quat::Identity();  // blended rest frame at t
  };
  std::size_t vertex_count = 0;
  std::vector<Entry> entries;
};

// Normalized linear blend of the two frame rotations.
Mat3 blend_frames(const Mat3& a, const Mat3& b, double t);

// Requires `rest.frames` to be populated.
SkinBinding bind_skin(const GaussianScene& scene, const Polyline3D& rest, const std::vector<std::uint32_t>& ids);

struct SkinnedPrimitive {
  std::uint32_t primitive = 0;
  Vec3 center = Vec3::Zero();
  Quat rotation_delta = Quat::Identity();
};

// Throws BindingInvalid when `current` does not match the bound topology or
// lacks frames.
std::vector<SkinnedPrimitive> apply_skinning(const SkinBinding& binding, const Polyline3D& current);

// Exports.
void write_polyline_obj(const Polyline3D& poly, const std::filesystem::path& path);
std::string polyline_to_json(const Polyline3D& poly);
Polyline3D polyline_from_json(const std::string& text);
std::string segmentation_to_json(const std::vector<std::uint32_t>& ids);
std::string binding_to_json(const SkinBinding& binding);

}  // namespace sketchrod
