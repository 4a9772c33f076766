#pragma once

#include "dataengine/geometry.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dataengine {

// Static 3-d tree for exact nearest-neighbour queries. The distance reported
// for a query is computed exactly as the brute-force loop would compute it,
// so results agree bit for bit with an O(N^2) scan.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  struct Hit {
    std::size_t index;
    double distance;
  };

  // Requires a non-empty tree.
  Hit nearest(const Vec3& q) const;
  double nearest_distance(const Vec3& q) const { return nearest(q).distance; }

 private:
  struct Node {
    // Leaf when axis < 0: covers order_[begin, end).
    std::int32_t axis = -1;
    double split = 0.0;
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);
  void search(std::int32_t node, const Vec3& q, double& best_sq, std::size_t& best) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace dataengine
