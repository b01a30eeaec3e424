#pragma once

#include <stdexcept>
#include <string>

namespace kinklab {

// Two ions closer than the hard Coulomb guard distance.
class SingularGeometryError : public std::runtime_error {
 public:
  explicit SingularGeometryError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative solver (relax, Newton, LM) failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Single-ion motion in the Paul trap is Floquet-unstable.
class FloquetInstabilityError : public std::runtime_error {
 public:
  FloquetInstabilityError(const std::string& what, double worst_multiplier_modulus)
      : std::runtime_error(what), worst_multiplier_modulus(worst_multiplier_modulus) {}
  double worst_multiplier_modulus;
};

class InvalidArgumentError : public std::invalid_argument {
 public:
  explicit InvalidArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace kinklab
