#include "path_extract.hpp"

#include "knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace sketchrod {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Stroke polyline with cumulative arc length at each vertex.
class StrokeCurve {
 public:
  explicit StrokeCurve(const Stroke& stroke) : points_(stroke.points) {
    cumulative_.resize(points_.size(), 0.0);
    for (std::size_t i = 1; i < points_.size(); ++i)
      cumulative_[i] = cumulative_[i - 1] + (points_[i] - points_[i - 1]).norm();
  }

  double length() const { return cumulative_.back(); }
  double arclength_at(std::size_t vertex) const { return cumulative_[vertex]; }

  // Arc length of the nearest point among segments [first, last].
  double project(const Vec2& q, std::size_t first, std::size_t last) const {
    double best_d = kInf;
    double best_s = 0.0;
    for (std::size_t i = first; i <= last && i + 1 < points_.size(); ++i) {
      const Vec2& a = points_[i];
      const Vec2 ab = points_[i + 1] - a;
      const double len2 = ab.squaredNorm();
      const double t = len2 > 0.0 ? std::clamp((q - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      const double d = (a + t * ab - q).norm();
      if (d < best_d) {
        best_d = d;
        best_s = cumulative_[i] + t * std::sqrt(len2);
      }
    }
    return best_s;
  }

  double project(const Vec2& q) const { return project(q, 0, points_.size() - 2); }

  // Projection restricted to segments overlapping [s - window, s + window].
  double project_near(const Vec2& q, double s, double window) const {
    const auto lo = std::upper_bound(cumulative_.begin(), cumulative_.end(), s - window);
    const auto hi = std::upper_bound(cumulative_.begin(), cumulative_.end(), s + window);
    const std::size_t first = lo == cumulative_.begin() ? 0 : static_cast<std::size_t>(lo - cumulative_.begin()) - 1;
    std::size_t last = static_cast<std::size_t>(hi - cumulative_.begin());
    last = std::min(last, points_.size() - 2);
    return project(q, std::min(first, last), last);
  }

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

// Window for tracking the stroke position along the search tree, px.
constexpr double kTrackWindow = 8.0;

PixelPath search(const IndexImage& image, const GaussianScene& scene, const Stroke& stroke, const StrokeCurve& curve,
                 const std::vector<double>& deviation, std::uint32_t src, std::uint32_t dst, double src_arclength) {
  const PixelGrid& grid = image.grid;
  PixelPath out;
  if (src == dst) {
    out.reached = true;
    out.pixels = {src};
    out.furthest = src;
    return out;
  }

  const std::size_t n = grid.size();
  std::vector<double> dist(n, kInf);
  std::vector<std::uint32_t> parent(n, kEmpty);
  std::vector<double> track(n, 0.0);
  std::vector<std::uint8_t> settled(n, 0);

  using Label = std::pair<double, std::uint32_t>;
  std::priority_queue<Label, std::vector<Label>, std::greater<>> queue;
  dist[src] = 0.0;
  track[src] = src_arclength;
  queue.push({0.0, src});

  const double max_jump = 3.0 * stroke.radius;
  std::uint32_t furthest = src;
  static constexpr int kOffsets[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};

  while (!queue.empty()) {
    const auto [d, i] = queue.top();
    queue.pop();
    if (settled[i]) continue;
    settled[i] = 1;
    if (track[i] > track[furthest]) furthest = i;
    if (i == dst) break;

    const Vec3& ci = scene.primitives[image.index[i]].center;
    // The source may lie outside the band when called directly; charge its
    // true deviation in that case.
    const double dev_i = std::isfinite(deviation[i]) ? deviation[i] : stroke_distance(stroke, grid.center_of(i));
    const int col = grid.col(i);
    const int row = grid.row(i);
    for (const auto& off : kOffsets) {
      const int c = col + off[0];
      const int r = row + off[1];
      if (c < 0 || r < 0 || c >= grid.width || r >= grid.height) continue;
      const std::uint32_t j = static_cast<std::uint32_t>(r * grid.width + c);
      if (settled[j] || image.index[j] == kEmpty || !std::isfinite(deviation[j])) continue;
      const double jump = (ci - scene.primitives[image.index[j]].center).norm();
      if (jump > max_jump) continue;
      const double nd = d + combine_weight(jump, stroke.alpha, dev_i);
      if (nd < dist[j] || (nd == dist[j] && i < parent[j])) {
        dist[j] = nd;
        parent[j] = i;
        track[j] = curve.project_near(grid.center_of(j), track[i], kTrackWindow);
        queue.push({nd, j});
      }
    }
  }

  out.reached = settled[dst] != 0;
  out.furthest = furthest;
  const std::uint32_t end = out.reached ? dst : furthest;
  out.cost = dist[end];
  for (std::uint32_t p = end; p != kEmpty; p = parent[p]) out.pixels.push_back(p);
  std::reverse(out.pixels.begin(), out.pixels.end());
  return out;
}

std::uint32_t stroke_pixel(const IndexImage& image, const Vec2& p) {
  return image.grid.contains(p) ? image.grid.index_of(p) : kEmpty;
}

}  // namespace

void Stroke::validate() const {
  if (points.size() < 2) throw Error(ErrorCode::InvalidArgument, "stroke needs at least 2 points");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw Error(ErrorCode::InvalidArgument, "stroke radius must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidArgument, "stroke alpha must be >= 0");
  for (const auto& p : points)
    if (!p.allFinite()) throw Error(ErrorCode::InvalidArgument, "stroke has a non-finite point");
}

double point_segment_distance(const Vec2& q, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((q - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - q).norm();
}

double stroke_distance(const Stroke& stroke, const Vec2& q) {
  double best = kInf;
  for (std::size_t i = 0; i + 1 < stroke.points.size(); ++i)
    best = std::min(best, point_segment_distance(q, stroke.points[i], stroke.points[i + 1]));
  return best;
}

double stroke_arclength(const Stroke& stroke, const Vec2& q) { return StrokeCurve(stroke).project(q); }

std::optional<double> edge_weight(const IndexImage& image, const GaussianScene& scene, std::uint32_t i,
                                  std::uint32_t j, const Stroke& stroke) {
  if (i >= image.index.size() || j >= image.index.size())
    throw Error(ErrorCode::Bounds, "pixel index outside the image");
  if (image.index[i] == kEmpty || image.index[j] == kEmpty) return std::nullopt;
  const double jump = (scene.primitives[image.index[i]].center - scene.primitives[image.index[j]].center).norm();
  if (jump > 3.0 * stroke.radius) return std::nullopt;
  return combine_weight(jump, stroke.alpha, stroke_distance(stroke, image.grid.center_of(i)));
}

std::vector<double> band_distance_field(const PixelGrid& grid, const Stroke& stroke, double band) {
  std::vector<double> field(grid.size(), kInf);
  for (std::size_t s = 0; s + 1 < stroke.points.size(); ++s) {
    const Vec2& a = stroke.points[s];
    const Vec2& b = stroke.points[s + 1];
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()) - band - 1.0)));
    const int c1 = std::min(grid.width - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()) + band)));
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()) - band - 1.0)));
    const int r1 = std::min(grid.height - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()) + band)));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) {
        const double d = point_segment_distance(Vec2(c + 0.5, r + 0.5), a, b);
        double& slot = field[static_cast<std::size_t>(r) * grid.width + c];
        if (d < slot) slot = d;
      }
  }
  for (double& d : field)
    if (d > band) d = kInf;
  return field;
}

PixelPath shortest_pixel_path(const IndexImage& image, const GaussianScene& scene, const Stroke& stroke,
                              std::uint32_t src, std::uint32_t dst, const PathOptions& options) {
  stroke.validate();
  if (src >= image.index.size() || dst >= image.index.size())
    throw Error(ErrorCode::Bounds, "pixel index outside the image");
  if (image.index[src] == kEmpty || image.index[dst] == kEmpty)
    throw Error(ErrorCode::InvalidArgument, "path endpoints must be on non-empty pixels");
  const StrokeCurve curve(stroke);
  const auto field = band_distance_field(image.grid, stroke, options.band);
  return search(image, scene, stroke, curve, field, src, dst, curve.project(image.grid.center_of(src)));
}

PathResult extract_path(const IndexImage& image, const GaussianScene& scene, const Stroke& stroke,
                        const PathOptions& options) {
  stroke.validate();
  const std::uint32_t first = stroke_pixel(image, stroke.points.front());
  const std::uint32_t last = stroke_pixel(image, stroke.points.back());
  if (first == kEmpty || image.index[first] == kEmpty)
    throw Error(ErrorCode::StrokeInvalid, "stroke starts outside the object (empty pixel)");
  if (last == kEmpty || image.index[last] == kEmpty)
    throw Error(ErrorCode::StrokeInvalid, "stroke ends outside the object (empty pixel)");

  const StrokeCurve curve(stroke);
  const auto field = band_distance_field(image.grid, stroke, options.band);
  const double depth_tolerance = 3.0 * stroke.radius;

  PathResult result;
  std::uint32_t src = first;
  std::size_t start_vertex = 0;
  std::vector<bool> covered(stroke.points.size(), false);

  auto finish = [&] {
    for (std::uint32_t p : result.pixels) {
      const std::uint32_t k = image.index[p];
      if (result.primitives.empty() || result.primitives.back() != k) result.primitives.push_back(k);
    }
  };

  for (;;) {
    PixelPath seg = search(image, scene, stroke, curve, field, src, last, curve.arclength_at(start_vertex));
    result.segment_starts.push_back(result.pixels.size());
    result.pixels.insert(result.pixels.end(), seg.pixels.begin(), seg.pixels.end());
    result.cost += seg.cost;
    if (seg.reached) break;

    // Mark stroke vertices near the path found so far.
    const double threshold = options.cover_threshold;
    for (std::size_t v = 0; v < stroke.points.size(); ++v) {
      if (covered[v]) continue;
      for (std::uint32_t p : seg.pixels)
        if ((image.grid.center_of(p) - stroke.points[v]).norm() < threshold) {
          covered[v] = true;
          break;
        }
    }

    const double loss_depth = image.depth[seg.furthest];
    std::optional<std::size_t> resume;
    for (std::size_t v = 0; v < stroke.points.size() && !resume; ++v) {
      if (covered[v]) continue;
      const std::uint32_t p = stroke_pixel(image, stroke.points[v]);
      if (p == kEmpty || image.index[p] == kEmpty) continue;
      if (std::abs(image.depth[p] - loss_depth) <= depth_tolerance) resume = v;
    }
    if (!resume) {
      finish();
      throw PartialExtractionError("path lost at pixel " + std::to_string(seg.furthest) +
                                       " and no stroke vertex qualifies for resuming",
                                   std::move(result));
    }
    result.gaps.push_back(*resume);
    covered[*resume] = true;
    start_vertex = *resume;
    src = stroke_pixel(image, stroke.points[*resume]);
  }
  finish();
  return result;
}

KnnPath naive_knn_path(const GaussianScene& scene, std::uint32_t k_first, std::uint32_t k_last, const Stroke& stroke,
                       const Camera& camera, int neighbours) {
  stroke.validate();
  if (k_first >= scene.size() || k_last >= scene.size())
    throw Error(ErrorCode::Bounds, "endpoint primitive index out of range");

  KnnPath out;
  if (k_first == k_last) {
    out.complete = true;
    out.chain = {k_first};
    return out;
  }

  std::vector<Vec3> centers;
  centers.reserve(scene.size());
  for (const auto& g : scene.primitives) centers.push_back(g.center);
  const KdTree tree(centers);
  const StrokeCurve curve(stroke);

  const std::size_t n = scene.size();
  std::vector<double> deviation(n, kInf);
  std::vector<double> progress(n, -kInf);
  for (std::size_t k = 0; k < n; ++k)
    if (auto proj = camera.project(centers[k])) {
      deviation[k] = stroke_distance(stroke, proj->pixel);
      progress[k] = curve.project(proj->pixel);
    }

  std::vector<double> dist(n, kInf);
  std::vector<std::uint32_t> parent(n, kEmpty);
  std::vector<std::uint8_t> settled(n, 0);
  using Label = std::pair<double, std::uint32_t>;
  std::priority_queue<Label, std::vector<Label>, std::greater<>> queue;
  dist[k_first] = 0.0;
  queue.push({0.0, k_first});
  std::uint32_t furthest = k_first;

  while (!queue.empty()) {
    const auto [d, a] = queue.top();
    queue.pop();
    if (settled[a]) continue;
    settled[a] = 1;
    if (progress[a] > progress[furthest]) furthest = a;
    if (a == k_last) break;
    if (!std::isfinite(deviation[a])) continue;
    for (std::uint32_t b : tree.nearest(centers[a], neighbours, a)) {
      if (settled[b] || !std::isfinite(deviation[b])) continue;
      const double nd = d + combine_weight((centers[a] - centers[b]).norm(), stroke.alpha, deviation[a]);
      if (nd < dist[b]) {
        dist[b] = nd;
        parent[b] = a;
        queue.push({nd, b});
      }
    }
  }

  out.complete = settled[k_last] != 0;
  const std::uint32_t end = out.complete ? k_last : furthest;
  out.cost = dist[end];
  for (std::uint32_t k = end; k != kEmpty; k = parent[k]) out.chain.push_back(k);
  std::reverse(out.chain.begin(), out.chain.end());
  return out;
}

}  // namespace sketchrod
