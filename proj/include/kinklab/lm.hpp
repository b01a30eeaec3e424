#pragma once

#include <functional>
#include <vector>

#include "kinklab/types.hpp"

namespace kinklab {

// Dense finite-difference Levenberg-Marquardt with parameter scaling, simple
// box bounds and frozen parameters. Small problems only (here: 6 parameters,
// a few hundred residuals).
struct LMOptions {
  int max_iterations = 150;
  Real fd_step = 1e-5;          // forward-difference step in scaled units
  Real lambda_init = 1e-3;
  Real lambda_up = 8.0;
  Real lambda_down = 0.2;
  Real tol_reduction = 1e-16;   // relative objective improvement
  Real tol_step = 1e-14;        // scaled step norm
};

struct LMResult {
  Vec params;
  Real objective = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
  int n_evaluations = 0;
};

using ResidualFn = std::function<Vec(const Vec&)>;

LMResult levenberg_marquardt(const ResidualFn& residuals, const Vec& initial, const Vec& scale,
                             const Vec& lower, const Vec& upper,
                             const std::vector<bool>& frozen, const LMOptions& opts = {});

}  // namespace kinklab
