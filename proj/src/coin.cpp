#include "qrw/coin.hpp"

#include <cmath>
#include <string>

namespace qrw {

Mat2 sigma(int mu) {
  Mat2 s;
  switch (mu) {
    case 0: s << 1, 0, 0, 1; break;
    case 1: s << 0, 1, 1, 0; break;
    case 2: s << 0, -kI, kI, 0; break;
    case 3: s << 1, 0, 0, -1; break;
    default: throw std::out_of_range("sigma index " + std::to_string(mu));
  }
  return s;
}

double CoinAngles::operator[](int l) const {
  switch (l) {
    case 0: return xi0;
    case 1: return xi1;
    case 2: return theta;
    case 3: return chi;
  }
  throw std::out_of_range("coin angle index " + std::to_string(l));
}

double& CoinAngles::operator[](int l) {
  switch (l) {
    case 0: return xi0;
    case 1: return xi1;
    case 2: return theta;
    case 3: return chi;
  }
  throw std::out_of_range("coin angle index " + std::to_string(l));
}

CoinAngles operator+(const CoinAngles& a, const CoinAngles& b) {
  return {a.xi0 + b.xi0, a.xi1 + b.xi1, a.theta + b.theta, a.chi + b.chi};
}

CoinAngles operator*(double s, const CoinAngles& a) {
  return {s * a.xi0, s * a.xi1, s * a.theta, s * a.chi};
}

Mat2 coin_matrix(const CoinAngles& a) {
  for (int l = 0; l < 4; ++l) {
    if (!std::isfinite(a[l])) throw std::domain_error("non-finite coin angle");
  }
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  const cplx ph = std::polar(1.0, a.xi0);
  Mat2 m;
  m << std::polar(c, a.xi1), kI * std::polar(s, a.chi),
      kI * std::polar(s, -a.chi), std::polar(c, -a.xi1);
  return ph * m;
}

EulerAngles euler_angles(const CoinAngles& a) {
  return {a.xi1 - a.chi, a.xi1 + a.chi, 2.0 * a.theta};
}

CoinAngles from_euler(const EulerAngles& e, double xi0) {
  return {xi0, 0.5 * (e.phi + e.psi), 0.5 * e.Theta, 0.5 * (e.phi - e.psi)};
}

AngleField::AngleField(std::array<Profile, 4> profiles, AngleScaling scaling)
    : profiles_(std::move(profiles)), scaling_(scaling) {
  for (const auto& p : profiles_) {
    if (!p) throw ConfigError("angle field profile is empty");
  }
}

AngleField AngleField::constant(const CoinAngles& rates, AngleScaling scaling) {
  AngleField f;
  f.constant_ = rates;
  f.scaling_ = scaling;
  return f;
}

AngleField AngleField::dirac_mass(double m) {
  CoinAngles r;
  r.theta = -m;
  return constant(r);
}

CoinAngles AngleField::rates(double t, double x) const {
  if (constant_) return *constant_;
  return {profiles_[0](t, x), profiles_[1](t, x), profiles_[2](t, x), profiles_[3](t, x)};
}

CoinAngles AngleField::angles(double t, double x, double eps) const {
  const CoinAngles r = rates(t, x);
  return scaling_ == AngleScaling::ballistic ? eps * r : r;
}

LatticeGrid::LatticeGrid(int n, double e, double o) : n_sites(n), eps(e), origin(o) {
  if (n < 4) throw ConfigError("lattice needs at least 4 sites");
  if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("lattice spacing must be positive");
}

LatticeGrid LatticeGrid::centered(int n, double eps) {
  return LatticeGrid(n, eps, -(n / 2) * eps);
}

WaveState WaveState::localized(const LatticeGrid& g, int site, const Vec2& chirality) {
  WaveState s(g);
  s.amp[g.wrap(site)] = chirality.normalized();
  return s;
}

WaveState WaveState::sampled(const LatticeGrid& g, const std::function<Vec2(double)>& psi) {
  WaveState s(g);
  const double w = std::sqrt(g.spacing());
  for (int i = 0; i < g.n_sites; ++i) s.amp[i] = w * psi(g.position(i));
  return s;
}

double WaveState::norm_squared() const {
  double n = 0.0;
  for (const auto& a : amp) n += a.squaredNorm();
  return n;
}

std::vector<double> WaveState::probabilities() const {
  std::vector<double> p(amp.size());
  for (std::size_t i = 0; i < amp.size(); ++i) p[i] = amp[i].squaredNorm();
  return p;
}

WaveState shift_apply(const WaveState& s) {
  const int n = s.grid.n_sites;
  WaveState out(s.grid);
  for (int i = 0; i < n; ++i) {
    out.amp[i](0) = s.amp[(i + 1) % n](0);
    out.amp[i](1) = s.amp[(i + n - 1) % n](1);
  }
  return out;
}

WaveState walk_step_with(const WaveState& s, const std::vector<Mat2>& coins) {
  const int n = s.grid.n_sites;
  if (coins.size() != 1 && coins.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("coin list must have size 1 or n_sites");
  }
  WaveState out = shift_apply(s);
  if (coins.size() == 1) {
    const Mat2& c = coins.front();
    for (auto& a : out.amp) a = c * a;
  } else {
    for (int i = 0; i < n; ++i) out.amp[i] = coins[i] * out.amp[i];
  }
  return out;
}

WaveState walk_step(const WaveState& s, const AngleField& field, double t) {
  const double eps = s.grid.eps;
  if (field.homogeneous()) {
    return walk_step_with(s, {coin_matrix(field.angles(t, 0.0, eps))});
  }
  std::vector<Mat2> coins(s.grid.n_sites);
  for (int i = 0; i < s.grid.n_sites; ++i) {
    coins[i] = coin_matrix(field.angles(t, s.grid.position(i), eps));
  }
  return walk_step_with(s, coins);
}

double asymptotic_spread(double theta) {
  return std::sqrt(1.0 - std::sin(theta));
}

double lattice_mean(const WaveState& s) {
  double m = 0.0;
  for (int i = 0; i < s.grid.n_sites; ++i) m += s.grid.position(i) * s.amp[i].squaredNorm();
  return m;
}

double lattice_stddev(const WaveState& s) {
  const double mu = lattice_mean(s);
  double v = 0.0;
  for (int i = 0; i < s.grid.n_sites; ++i) {
    const double d = s.grid.position(i) - mu;
    v += d * d * s.amp[i].squaredNorm();
  }
  return std::sqrt(v);
}

}  // namespace qrw
