#include "mql/replay/sum_tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mql {

SumTree::SumTree(std::size_t min_capacity) {
  if (min_capacity == 0) throw std::invalid_argument("SumTree: capacity must be positive");
  capacity_ = 1;
  while (capacity_ < min_capacity) capacity_ <<= 1;
  nodes_.assign(2 * capacity_, 0.0);
}

void SumTree::set(std::size_t i, double value) {
  if (i >= capacity_) throw std::out_of_range("SumTree::set: leaf index out of range");
  if (!(value >= 0.0) || !std::isfinite(value)) throw std::invalid_argument("SumTree::set: leaf values must be finite and >= 0");
  std::size_t node = capacity_ + i;
  nodes_[node] = value;
  for (node >>= 1; node >= 1; node >>= 1) nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
}

std::size_t SumTree::find_prefix(double mass) const {
  if (!(mass >= 0.0) || mass >= total()) throw std::out_of_range("SumTree::find_prefix: mass outside [0, total)");
  std::size_t node = 1;
  while (node < capacity_) {
    const std::size_t left = 2 * node;
    if (mass < nodes_[left]) {
      node = left;
    } else {
      mass -= nodes_[left];
      node = left + 1;
    }
  }
  std::size_t leaf_index = node - capacity_;
  // Rounding in the subtraction chain can land on an empty leaf; fall back
  // to the nearest non-empty leaf on the left.
  while (nodes_[capacity_ + leaf_index] <= 0.0 && leaf_index > 0) --leaf_index;
  return leaf_index;
}

void SumTree::rebuild() {
  for (std::size_t node = capacity_ - 1; node >= 1; --node) nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
}

double SumTree::max_sum_defect() const {
  double worst = 0.0;
  for (std::size_t node = 1; node < capacity_; ++node)
    worst = std::max(worst, std::abs(nodes_[node] - (nodes_[2 * node] + nodes_[2 * node + 1])));
  return worst;
}

}  // namespace mql
