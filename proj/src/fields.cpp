#include "qrw/fields.hpp"

#include <algorithm>

namespace qrw {

PdeGrid::PdeGrid(int n_, double dx_, double x_min_) : n(n_), dx(dx_), x_min(x_min_) {
  if (n_ < 4) throw ConfigError("grid needs at least 4 points");
  if (!(dx_ > 0.0) || !std::isfinite(dx_)) throw ConfigError("dx must be positive");
}

PdeGrid PdeGrid::symmetric(double half_width, double dx) {
  if (!(half_width > 0.0)) throw ConfigError("half width must be positive");
  if (!(dx > 0.0)) throw ConfigError("dx must be positive");
  const int half = static_cast<int>(std::ceil(half_width / dx - 1e-9));
  return PdeGrid(2 * half + 1, dx, -half * dx);
}

bool PdeGrid::is_symmetric() const {
  return std::abs(x_min + x(n - 1)) <= 1e-9 * dx;
}

FourPlanes::FourPlanes(const PdeGrid& g) : grid(g) {
  for (auto& p : c) p.assign(g.cells(), cplx(0.0));
}

double FourPlanes::max_abs() const {
  double m = 0.0;
  for (const auto& p : c) {
    for (const cplx& z : p) m = std::max(m, std::abs(z));
  }
  return m;
}

double PauliField::trace() const {
  double s = 0.0;
  for (int i = 0; i < grid.n; ++i) s += at(0, i, i).real();
  return s * grid.dx;
}

double PauliField::hermiticity_error() const {
  double err = 0.0;
  for (int mu = 0; mu < 4; ++mu) {
    for (int i = 0; i < grid.n; ++i) {
      for (int j = i; j < grid.n; ++j) {
        err = std::max(err, std::abs(at(mu, i, j) - std::conj(at(mu, j, i))));
      }
    }
  }
  return err;
}

void MomentSeries::push(double t, double mean, double second, double tr, double residual) {
  times.push_back(t);
  mean_x.push_back(mean);
  second_moment.push_back(second);
  eta.push_back(kMissing);
  trace.push_back(tr);
  continuity_residual.push_back(residual);
}

}  // namespace qrw
