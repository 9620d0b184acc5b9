#pragma once

#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "livo/types.hpp"

namespace livo {

/// Static 3-d kd-tree over a point array it does not own.
class KdTree {
 public:
  struct Neighbor {
    std::uint32_t index;
    double sq_distance;
  };

  KdTree() = default;
  void build(std::span<const Vec3> points);

  /// k nearest neighbors sorted by increasing distance (fewer if the tree is
  /// smaller than k).
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

  std::size_t size() const { return order_.size(); }

 private:
  struct Node {
    std::uint32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    std::uint8_t axis = 0;
    double split = 0.0;
  };
  std::int32_t build_node(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& q, std::size_t k, std::vector<Neighbor>& best) const;

  std::span<const Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Append-only world-frame point cloud with voxel de-duplication. The
/// kd-tree is rebuilt in bulk after every insert() call.
class PointMap {
 public:
  explicit PointMap(double voxel_size = 0.1) : voxel_size_(voxel_size) {}

  /// Adds points whose voxel is not occupied yet. Returns the number kept.
  std::size_t insert(std::span<const Vec3> world_points);

  std::vector<KdTree::Neighbor> knn(const Vec3& query, std::size_t k) const {
    return tree_.knn(query, k);
  }

  const std::vector<Vec3>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  double voxel_size() const { return voxel_size_; }

 private:
  std::uint64_t voxel_key(const Vec3& p) const;

  double voxel_size_;
  std::vector<Vec3> points_;
  std::unordered_set<std::uint64_t> occupied_;
  KdTree tree_;
};

}  // namespace livo
