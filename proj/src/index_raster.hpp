#pragma once

#include "scene_io.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sketchrod {

inline constexpr std::uint32_t kEmpty = 0xFFFFFFFFu;

// Pixel indexing on a width x height grid: I(p) = floor(p.y) * width + floor(p.x),
// and the inverse returns the pixel center.
struct PixelGrid {
  int width = 0;
  int height = 0;

  std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  bool contains(const Vec2& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < width && p.y() < height;
  }
  // Precondition: contains(p).
  std::uint32_t index_of(const Vec2& p) const {
    return static_cast<std::uint32_t>(static_cast<int>(p.y()) * width + static_cast<int>(p.x()));
  }
  Vec2 center_of(std::uint32_t pixel) const {
    return Vec2(pixel % static_cast<std::uint32_t>(width) + 0.5, pixel / static_cast<std::uint32_t>(width) + 0.5);
  }
  int col(std::uint32_t pixel) const { return static_cast<int>(pixel % static_cast<std::uint32_t>(width)); }
  int row(std::uint32_t pixel) const { return static_cast<int>(pixel / static_cast<std::uint32_t>(width)); }
};

// Per-pixel most-contributing primitive, its center depth, and its blend weight.
struct IndexImage {
  PixelGrid grid;
  std::vector<std::uint32_t> index;  // kEmpty where nothing contributed
  std::vector<double> depth;         // camera-space center depth of index[i]; 0 where empty
  std::vector<double> contribution;  // winning alpha * transmittance; 0 where empty

  int width() const { return grid.width; }
  int height() const { return grid.height; }
  bool empty_at(std::uint32_t pixel) const { return index[pixel] == kEmpty; }
};

// A primitive after projection to the image plane.
struct Splat2D {
  std::uint32_t id = 0;
  Vec2 mean = Vec2::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
  // Inverse of cov, stored as (a, b, c) for [[a, b], [b, c]].
  double conic_a = 1.0;
  double conic_b = 0.0;
  double conic_c = 1.0;
  double opacity = 0.0;
  double depth = 0.0;
  // Squared Mahalanobis radius beyond which alpha is certainly below the floor
  // (at most 9, the 3-sigma truncation).
  double reach2 = 9.0;
  // Inclusive pixel bounds of the footprint within reach2.
  int min_col = 0, max_col = -1, min_row = 0, max_row = -1;
};

struct RasterOptions {
  int tile_size = 16;
  unsigned threads = 0;  // 0: hardware concurrency
};

// Contributions with alpha below this are skipped.
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kMaxAlpha = 0.99;
// Blending for a pixel stops once transmittance falls below this.
inline constexpr double kMinTransmittance = 1e-4;
// Screen-space low-pass dilation added to the projected covariance, in px^2.
inline constexpr double kCovarianceDilation = 0.3;
inline constexpr double kNearPlane = 0.01;

// World covariance R diag(s^2) R^T of one primitive.
Mat3 world_covariance(const GaussianPrimitive& g);

// Projects every primitive in front of the near plane whose footprint touches
// the image. Order follows primitive index.
std::vector<Splat2D> project_splats(const GaussianScene& scene, const Camera& camera);

// Alpha of `splat` at pixel-space point (x, y): opacity * exp(-d^T cov^-1 d / 2),
// clamped at kMaxAlpha, zero outside the 3-sigma ellipse or below kMinAlpha.
double splat_alpha(const Splat2D& splat, double x, double y);

IndexImage rasterize_index_image(const GaussianScene& scene, const Camera& camera,
                                 const RasterOptions& options = {});

// index[I(p)]. Throws Bounds when p is outside the image.
std::uint32_t lookup(const IndexImage& image, const Vec2& p);

// False-color PNG (`<prefix>.png`) plus raw sidecar (`<prefix>.raw`): u32 width,
// u32 height, width*height u32 indices, width*height f32 depths, little-endian.
void write_index_debug(const IndexImage& image, const std::filesystem::path& prefix);
IndexImage read_index_sidecar(const std::filesystem::path& raw_path);

}  // namespace sketchrod
