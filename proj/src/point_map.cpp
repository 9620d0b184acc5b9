#include "livo/point_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace livo {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

void KdTree::build(std::span<const Vec3> points) {
  points_ = points;
  order_.resize(points.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.clear();
  nodes_.reserve(2 * points.size() / kLeafSize + 1);
  if (!points.empty()) build_node(0, static_cast<std::uint32_t>(points.size()));
}

std::int32_t KdTree::build_node(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  Eigen::Index axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build_node(begin, mid);
  const std::int32_t right = build_node(mid, end);
  Node& n = nodes_[id];
  n.axis = static_cast<std::uint8_t>(axis);
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

void KdTree::search(std::int32_t node, const Vec3& q, std::size_t k,
                    std::vector<Neighbor>& best) const {
  const Node& n = nodes_[node];
  if (n.left < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const double d2 = (points_[order_[i]] - q).squaredNorm();
      if (best.size() < k || d2 < best.back().sq_distance) {
        Neighbor cand{order_[i], d2};
        auto pos = std::upper_bound(best.begin(), best.end(), cand,
                                    [](const Neighbor& a, const Neighbor& b) {
                                      return a.sq_distance < b.sq_distance;
                                    });
        best.insert(pos, cand);
        if (best.size() > k) best.pop_back();
      }
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const std::int32_t near = diff < 0.0 ? n.left : n.right;
  const std::int32_t far = diff < 0.0 ? n.right : n.left;
  search(near, q, k, best);
  if (best.size() < k || diff * diff < best.back().sq_distance) search(far, q, k, best);
}

std::vector<KdTree::Neighbor> KdTree::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> best;
  if (nodes_.empty() || k == 0) return best;
  best.reserve(k + 1);
  search(0, query, k, best);
  return best;
}

std::uint64_t PointMap::voxel_key(const Vec3& p) const {
  // 21 bits per axis, offset so that +-100 km fits.
  auto cell = [&](double v) {
    const auto c = static_cast<std::int64_t>(std::floor(v / voxel_size_)) + (1 << 20);
    return static_cast<std::uint64_t>(c) & 0x1FFFFFu;
  };
  return (cell(p.x()) << 42) | (cell(p.y()) << 21) | cell(p.z());
}

std::size_t PointMap::insert(std::span<const Vec3> world_points) {
  std::size_t kept = 0;
  for (const Vec3& p : world_points) {
    if (!p.allFinite()) continue;
    if (occupied_.insert(voxel_key(p)).second) {
      points_.push_back(p);
      ++kept;
    }
  }
  tree_.build(points_);
  return kept;
}

}  // namespace livo
