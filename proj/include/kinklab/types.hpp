#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace kinklab {

using Real = double;
using Index = Eigen::Index;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// N x 3 ion coordinate block, one row per ion.
using Coords = Eigen::Matrix<Real, Eigen::Dynamic, 3>;
// N x 2 projected camera-plane points.
using Points2 = Eigen::Matrix<Real, Eigen::Dynamic, 2>;

namespace constants {
inline constexpr Real pi = 3.14159265358979323846;
inline constexpr Real elementary_charge = 1.602176634e-19;     // C
inline constexpr Real atomic_mass_unit = 1.66053906660e-27;    // kg
inline constexpr Real boltzmann = 1.380649e-23;                // J/K
inline constexpr Real vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr Real coulomb_constant = 8.9875517923e9;       // 1/(4 pi eps0)
}  // namespace constants

}  // namespace kinklab
