#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sketchrod {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Degree-0 spherical harmonic basis constant.
inline constexpr double kShC0 = 0.28209479177387814;

struct GaussianPrimitive {
  Vec3 center = Vec3::Zero();
  Quat rotation = Quat::Identity();
  Vec3 scales = Vec3::Ones();  // standard deviations, world units
  double opacity = 1.0;        // post-sigmoid
  Vec3 color = Vec3::Constant(0.5);
};

// Primitive index k is its position in `primitives` and stays stable for the
// lifetime of a session.
struct GaussianScene {
  std::vector<GaussianPrimitive> primitives;

  std::size_t size() const { return primitives.size(); }
  bool empty() const { return primitives.empty(); }
  // Axis-aligned bounds of the primitive centers.
  Eigen::AlignedBox3d bounds() const;
};

struct Projection {
  Vec2 pixel;
  double depth;
};

// Pinhole camera. Camera space is x right, y down, +z forward; pixel (c, r)
// covers [c, c+1) x [r, r+1).
struct Camera {
  Mat3 rotation = Mat3::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }

  // Empty when the point is not in front of the camera plane.
  std::optional<Projection> project(const Vec3& world) const;

  // Throws Validation if the camera is not a usable rigid pinhole camera.
  void validate() const;

  // Convenience constructor used by fixtures and tests.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                        int height, double focal);
};

GaussianScene load_ply(const std::filesystem::path& path);
void save_ply(const GaussianScene& scene, const std::filesystem::path& path);

// Camera document: {"world_to_camera": [16 row-major], "intrinsics": {"fx","fy",
// "cx","cy"}, "width", "height"}.
Camera camera_from_json_text(const std::string& text);
Camera load_camera(const std::filesystem::path& path);
std::string camera_to_json_text(const Camera& camera);

}  // namespace sketchrod
