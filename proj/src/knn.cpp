#include "knn.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace sketchrod {

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  std::vector<std::uint32_t> ids(points_.size());
  std::iota(ids.begin(), ids.end(), 0u);
  nodes_.reserve(points_.size());
  root_ = build(ids, 0, ids.size(), 0);
}

int KdTree::build(std::vector<std::uint32_t>& ids, std::size_t lo, std::size_t hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(ids.begin() + lo, ids.begin() + mid, ids.begin() + hi, [&](std::uint32_t a, std::uint32_t b) {
    const double pa = points_[a][axis], pb = points_[b][axis];
    return pa != pb ? pa < pb : a < b;
  });
  const int node = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{ids[mid], axis});
  const int left = build(ids, lo, mid, depth + 1);
  const int right = build(ids, mid + 1, hi, depth + 1);
  nodes_[node].left = left;
  nodes_[node].right = right;
  return node;
}

std::vector<std::uint32_t> KdTree::nearest(const Vec3& query, int k, std::uint32_t skip) const {
  using Entry = std::pair<double, std::uint32_t>;  // (squared distance, id), max-heap
  std::priority_queue<Entry> best;
  if (k <= 0) return {};

  auto visit = [&](auto&& self, int n) -> void {
    if (n < 0) return;
    const Node& node = nodes_[n];
    const Vec3& p = points_[node.point];
    if (node.point != skip) {
      const Entry e{(p - query).squaredNorm(), node.point};
      if (static_cast<int>(best.size()) < k) best.push(e);
      else if (e < best.top()) {
        best.pop();
        best.push(e);
      }
    }
    const double diff = query[node.axis] - p[node.axis];
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    self(self, near);
    if (static_cast<int>(best.size()) < k || diff * diff <= best.top().first) self(self, far);
  };
  visit(visit, root_);

  std::vector<Entry> sorted;
  while (!best.empty()) {
    sorted.push_back(best.top());
    best.pop();
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::uint32_t> out;
  out.reserve(sorted.size());
  for (const auto& e : sorted) out.push_back(e.second);
  return out;
}

}  // namespace sketchrod
