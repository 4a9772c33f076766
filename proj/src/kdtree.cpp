#include "dataengine/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dataengine/errors.hpp"

namespace dataengine {

namespace {
constexpr std::uint32_t kLeafSize = 12;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()), 0);
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, int depth) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{});
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  // Split on the widest extent.
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  (void)depth;

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];

  const std::int32_t left = build(begin, mid, depth + 1);
  const std::int32_t right = build(mid, end, depth + 1);
  Node& n = nodes_[id];
  n.axis = axis;
  n.split = split;
  n.begin = begin;
  n.end = end;
  n.left = left;
  n.right = right;
  return id;
}

void KdTree::search(std::int32_t node_id, const Vec3& q, double& best_sq,
                    std::size_t& best) const {
  const Node& n = nodes_[node_id];
  if (n.axis < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (d < best_sq || (d == best_sq && idx < best)) {
        best_sq = d;
        best = idx;
      }
    }
    return;
  }
  const double delta = q[n.axis] - n.split;
  const std::int32_t near = delta < 0 ? n.left : n.right;
  const std::int32_t far = delta < 0 ? n.right : n.left;
  search(near, q, best_sq, best);
  // Points equal to the split value can sit on either side of it.
  if (delta * delta <= best_sq) search(far, q, best_sq, best);
}

KdTree::Hit KdTree::nearest(const Vec3& q) const {
  if (points_.empty()) throw InvalidArgument("nearest-neighbour query on an empty tree");
  double best_sq = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  search(0, q, best_sq, best);
  return {best, std::sqrt(best_sq)};
}

}  // namespace dataengine
