#pragma once

#include <cstddef>
#include <span>

namespace tracebench {

// Fixed-topology pairwise summation: the result depends only on the order of
// `values`, never on chunking or thread count, and error grows O(log n).
double pairwise_sum(std::span<const double> values);

}  // namespace tracebench
