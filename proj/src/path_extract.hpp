#pragma once

#include "error.hpp"
#include "index_raster.hpp"
#include "scene_io.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace sketchrod {

// User stroke in pixel coordinates. `radius` is the slender object's radius in
// world units; `alpha` weighs squared stroke deviation (world length per px^2).
struct Stroke {
  std::vector<Vec2> points;
  double radius = 0.0;
  double alpha = 1.0;

  // Throws InvalidArgument unless N >= 2, radius > 0, alpha >= 0, all finite.
  void validate() const;
};

// Point-to-segment Euclidean distance. Shared by every D_s evaluation so that
// all routes produce bit-identical values.
double point_segment_distance(const Vec2& q, const Vec2& a, const Vec2& b);

// Minimum distance from q to the stroke polyline, in pixels.
double stroke_distance(const Stroke& stroke, const Vec2& q);

// Arc-length position (pixels from p_1) of the point on the stroke nearest q.
double stroke_arclength(const Stroke& stroke, const Vec2& q);

// Directed pixel-graph weight |c_K[i] - c_K[j]| + alpha * D_s(center(i))^2.
// Empty when either pixel is EMPTY or the centers are more than 3R apart.
// Adjacency is the caller's responsibility.
std::optional<double> edge_weight(const IndexImage& image, const GaussianScene& scene, std::uint32_t i,
                                  std::uint32_t j, const Stroke& stroke);

// The arithmetic behind edge_weight, given the two centers and D_s(i).
inline double combine_weight(double center_distance, double alpha, double deviation) {
  return center_distance + alpha * (deviation * deviation);
}

struct PathOptions {
  double band = 40.0;            // search band half-width around the stroke, px
  double cover_threshold = 10.0; // stroke vertices this close to the path are covered, px
};

// Per-pixel D_s restricted to the search band; +inf outside it.
std::vector<double> band_distance_field(const PixelGrid& grid, const Stroke& stroke, double band);

struct PixelPath {
  bool reached = false;
  std::vector<std::uint32_t> pixels;  // src .. dst, or src .. furthest when !reached
  double cost = 0.0;                  // cost of `pixels`
  std::uint32_t furthest = kEmpty;    // settled pixel furthest along the stroke
};

// Label-setting shortest path over the 8-connected grid restricted to the band.
// Throws InvalidArgument when src or dst is EMPTY.
PixelPath shortest_pixel_path(const IndexImage& image, const GaussianScene& scene, const Stroke& stroke,
                              std::uint32_t src, std::uint32_t dst, const PathOptions& options = {});

struct PathResult {
  std::vector<std::uint32_t> pixels;
  // Offsets into `pixels` where each search segment starts; the first is 0.
  std::vector<std::size_t> segment_starts;
  std::vector<std::uint32_t> primitives;  // consecutive duplicates collapsed
  // Stroke vertex index at which the search resumed after each occlusion break.
  std::vector<std::size_t> gaps;
  double cost = 0.0;
};

class PartialExtractionError : public Error {
 public:
  PartialExtractionError(const std::string& message, PathResult partial)
      : Error(ErrorCode::PartialExtraction, message), partial_(std::move(partial)) {}
  const PathResult& partial() const noexcept { return partial_; }

 private:
  PathResult partial_;
};

// Full extraction with occlusion handling. Throws StrokeInvalid when an
// endpoint is outside the image or on an EMPTY pixel, PartialExtractionError
// when the search cannot be resumed.
PathResult extract_path(const IndexImage& image, const GaussianScene& scene, const Stroke& stroke,
                        const PathOptions& options = {});

struct KnnPath {
  bool complete = false;
  std::vector<std::uint32_t> chain;
  double cost = 0.0;
};

// Baseline: the same weight minimized over the k-nearest-neighbour graph of
// primitive centers (D_s evaluated at each projected center). Returns a
// partial chain when k_last is unreachable.
KnnPath naive_knn_path(const GaussianScene& scene, std::uint32_t k_first, std::uint32_t k_last, const Stroke& stroke,
                       const Camera& camera, int neighbours = 8);

}  // namespace sketchrod
