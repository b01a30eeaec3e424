#pragma once

#include <vector>

#include "kinklab/types.hpp"

namespace kinklab {

// Minimum-cost perfect assignment on a square cost matrix (Hungarian
// algorithm, O(n^3)). Returns row_to_col; total cost in *cost if non-null.
// Crystals here have at most ~60 ions, so the cubic bound is immaterial.
std::vector<int> min_cost_assignment(const Mat& cost, Real* total_cost = nullptr);

// Sum of squared distances between two point sets under the optimal pairing.
Real matched_squared_distance(const Points2& a, const Points2& b);

}  // namespace kinklab
