#pragma once

#include <cstddef>
#include <vector>

namespace mql {

/// Complete binary tree over `capacity` leaves (rounded up to a power of
/// two); node 1 is the root and leaf i lives at node capacity + i.
class SumTree {
 public:
  explicit SumTree(std::size_t min_capacity);

  std::size_t capacity() const { return capacity_; }
  double total() const { return nodes_[1]; }
  double leaf(std::size_t i) const { return nodes_[capacity_ + i]; }

  /// Sets leaf i (>= 0) and refreshes sums along its root path.
  void set(std::size_t i, double value);

  /// Leaf where the running prefix sum first exceeds `mass`; O(log n).
  /// Requires 0 <= mass < total().
  std::size_t find_prefix(double mass) const;

  /// Recomputes every internal node from the leaves.
  void rebuild();

  /// Max |node - (left + right)| over internal nodes.
  double max_sum_defect() const;

  const std::vector<double>& nodes() const { return nodes_; }

 private:
  std::size_t capacity_;
  std::vector<double> nodes_;
};

}  // namespace mql
