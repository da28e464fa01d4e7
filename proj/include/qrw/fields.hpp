#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "qrw/types.hpp"

namespace qrw {

// Uniform periodic grid x_i = x_min + i dx, i = 0..n-1.
struct PdeGrid {
  int n = 0;
  double dx = 0.0;
  double x_min = 0.0;

  PdeGrid() = default;
  PdeGrid(int n, double dx, double x_min);
  // Odd n, x_{(n-1)/2} = 0, so x_{n-1-i} = -x_i.
  static PdeGrid symmetric(double half_width, double dx);

  double x(int i) const { return x_min + i * dx; }
  bool is_symmetric() const;
  int wrap(int i) const { return ((i % n) + n) % n; }
  std::size_t cells() const { return static_cast<std::size_t>(n) * n; }
};

// Four complex planes over (x, x'), row-major; used for both r^mu and v^mu.
struct FourPlanes {
  PdeGrid grid;
  std::array<std::vector<cplx>, 4> c;

  FourPlanes() = default;
  explicit FourPlanes(const PdeGrid& g);

  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * grid.n + j; }
  cplx& at(int mu, int i, int j) { return c[mu][idx(i, j)]; }
  const cplx& at(int mu, int i, int j) const { return c[mu][idx(i, j)]; }
  double max_abs() const;
};

// r^mu(x, x') = tr(rho(x, x') sigma^mu), continuum normalization sum r0(x,x) dx = 1.
struct PauliField : FourPlanes {
  using FourPlanes::FourPlanes;
  double trace() const;
  double hermiticity_error() const;
};

// v = U r.
struct CharacteristicField : FourPlanes {
  using FourPlanes::FourPlanes;
};

// R^mu(x) = r^mu(x, x); real parts kept, imaginary parts dropped.
struct DiagonalFields {
  PdeGrid grid;
  double t = 0.0;
  std::array<std::vector<double>, 4> R;
  double max_imag = 0.0;
};

// T^mu(x) = r^mu(x, -x).
struct AntiDiagonalFields {
  PdeGrid grid;
  std::array<std::vector<cplx>, 4> T;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct MomentSeries {
  std::vector<double> times;
  std::vector<double> mean_x;
  std::vector<double> second_moment;
  std::vector<double> eta;
  std::vector<double> trace;
  std::vector<double> continuity_residual;

  std::size_t size() const { return times.size(); }
  void push(double t, double mean, double second, double tr, double residual);
};

}  // namespace qrw
