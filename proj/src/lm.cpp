#include "kinklab/lm.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "kinklab/errors.hpp"

namespace kinklab {

LMResult levenberg_marquardt(const ResidualFn& residuals, const Vec& initial, const Vec& scale,
                             const Vec& lower, const Vec& upper,
                             const std::vector<bool>& frozen, const LMOptions& opts) {
  const Index np = initial.size();
  if (scale.size() != np || lower.size() != np || upper.size() != np ||
      Index(frozen.size()) != np)
    throw InvalidArgumentError("levenberg_marquardt: parameter vector size mismatch");

  auto clamp = [&](Vec p) {
    for (Index k = 0; k < np; ++k) p[k] = std::min(std::max(p[k], lower[k]), upper[k]);
    return p;
  };

  LMResult result;
  Vec p = clamp(initial);
  Vec r = residuals(p);
  ++result.n_evaluations;
  Real f = r.squaredNorm();
  Real lambda = opts.lambda_init;

  for (int it = 0; it < opts.max_iterations; ++it) {
    result.iterations = it + 1;

    // Forward-difference Jacobian in scaled coordinates (frozen columns zero).
    Mat jac = Mat::Zero(r.size(), np);
    for (Index k = 0; k < np; ++k) {
      if (frozen[size_t(k)]) continue;
      Vec pk = p;
      const Real h = opts.fd_step * scale[k];
      pk[k] += h;
      // Step inside the bounds if the forward point leaves the box.
      Real hh = h;
      if (pk[k] > upper[k]) {
        pk[k] = p[k] - h;
        hh = -h;
      }
      const Vec rk = residuals(pk);
      ++result.n_evaluations;
      jac.col(k) = (rk - r) / hh;
    }

    const Mat jtj = jac.transpose() * jac;
    const Vec jtr = jac.transpose() * r;
    const Real g_norm = jtr.cwiseAbs().maxCoeff();
    if (g_norm < 1e-16) {
      result.converged = true;
      break;
    }

    bool accepted = false;
    for (int tries = 0; tries < 24; ++tries) {
      Mat a = jtj;
      for (Index k = 0; k < np; ++k)
        a(k, k) += lambda * std::max(jtj(k, k), Real(1e-12));
      Vec step = a.ldlt().solve(-jtr);
      for (Index k = 0; k < np; ++k)
        if (frozen[size_t(k)]) step[k] = 0.0;
      if (!step.allFinite()) {
        lambda *= opts.lambda_up;
        continue;
      }
      const Vec p_try = clamp(p + step);
      const Vec r_try = residuals(p_try);
      ++result.n_evaluations;
      const Real f_try = r_try.squaredNorm();
      if (f_try < f) {
        const Real reduction = (f - f_try) / std::max(f, Real(1e-300));
        Real scaled_step = 0.0;
        for (Index k = 0; k < np; ++k)
          scaled_step += std::pow((p_try[k] - p[k]) / scale[k], 2);
        p = p_try;
        r = r_try;
        f = f_try;
        lambda = std::max(lambda * opts.lambda_down, Real(1e-16));
        accepted = true;
        // Converged only when the step stalls AND the damping is already
        // relaxed; a crushed step at high lambda just means the valley is
        // anisotropic and the next iteration should keep pushing.
        if ((reduction < opts.tol_reduction || std::sqrt(scaled_step) < opts.tol_step ||
             f < 1e-300) &&
            lambda < 1e-6)
          result.converged = true;
        break;
      }
      lambda *= opts.lambda_up;
    }
    if (!accepted || result.converged) {
      result.converged = result.converged || !accepted;  // stalled == local optimum
      break;
    }
  }

  result.params = p;
  result.objective = f;
  return result;
}

}  // namespace kinklab
