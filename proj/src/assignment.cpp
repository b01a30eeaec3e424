#include "kinklab/assignment.hpp"

#include <limits>

#include "kinklab/errors.hpp"

namespace kinklab {

// Classic O(n^3) Hungarian algorithm with potentials (Jonker-style row
// augmentation). Rows and columns are 1-based internally; index 0 is the
// virtual source.
std::vector<int> min_cost_assignment(const Mat& cost, Real* total_cost) {
  const int n = int(cost.rows());
  if (cost.cols() != n) throw InvalidArgumentError("min_cost_assignment: square matrix required");
  const Real inf = std::numeric_limits<Real>::infinity();

  std::vector<Real> u(size_t(n) + 1, 0.0), v(size_t(n) + 1, 0.0);
  std::vector<int> p(size_t(n) + 1, 0), way(size_t(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<Real> minv(size_t(n) + 1, inf);
    std::vector<char> used(size_t(n) + 1, 0);
    do {
      used[size_t(j0)] = 1;
      const int i0 = p[size_t(j0)];
      Real delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[size_t(j)]) continue;
        const Real cur = cost(i0 - 1, j - 1) - u[size_t(i0)] - v[size_t(j)];
        if (cur < minv[size_t(j)]) {
          minv[size_t(j)] = cur;
          way[size_t(j)] = j0;
        }
        if (minv[size_t(j)] < delta) {
          delta = minv[size_t(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[size_t(j)]) {
          u[size_t(p[size_t(j)])] += delta;
          v[size_t(j)] -= delta;
        } else {
          minv[size_t(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[size_t(j0)] != 0);
    do {
      const int j1 = way[size_t(j0)];
      p[size_t(j0)] = p[size_t(j1)];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(size_t(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[size_t(j)] > 0) row_to_col[size_t(p[size_t(j)] - 1)] = j - 1;
  if (total_cost) {
    Real c = 0.0;
    for (int i = 0; i < n; ++i) c += cost(i, row_to_col[size_t(i)]);
    *total_cost = c;
  }
  return row_to_col;
}

Real matched_squared_distance(const Points2& a, const Points2& b) {
  if (a.rows() != b.rows()) throw InvalidArgumentError("matched_squared_distance: size mismatch");
  const int n = int(a.rows());
  if (n == 0) return 0.0;
  Mat cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  Real total = 0.0;
  min_cost_assignment(cost, &total);
  return total;
}

}  // namespace kinklab
