#pragma once

#include "scene_io.hpp"

#include <cstdint>
#include <vector>

namespace sketchrod {

// Static 3D kd-tree over a point set for k-nearest-neighbour queries.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points);

  // The k nearest points to `query` (excluding index `skip`), ordered by
  // (distance, index).
  std::vector<std::uint32_t> nearest(const Vec3& query, int k, std::uint32_t skip = UINT32_MAX) const;

  const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    std::uint32_t point;
    int axis;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<std::uint32_t>& ids, std::size_t lo, std::size_t hi, int depth);

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace sketchrod
