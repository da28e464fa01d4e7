#pragma once

#include <array>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qrw {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec2 = Eigen::Vector2cd;
using Vec4 = Eigen::Vector4cd;

inline constexpr cplx kI{0.0, 1.0};

// Invalid user input: parameters, grids, config files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure left its domain of validity (blow-up, singular solve).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// sigma(0) is the identity; sigma(1..3) are the Pauli matrices.
Mat2 sigma(int mu);

}  // namespace qrw
