#include "qrw/analytic.hpp"

#include <fftw3.h>

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <numbers>
#include <sstream>

namespace qrw {

namespace {

constexpr double kSeriesLimit = 15.0;

void check_order(int order) {
  if (order != 0 && order != 1) throw std::domain_error("bessel order must be 0 or 1");
}

}  // namespace

double bessel_i_series(int order, double x) {
  check_order(order);
  if (x < 0.0) throw std::domain_error("bessel argument must be non-negative");
  const double q = 0.25 * x * x;
  double term = order == 0 ? 1.0 : 0.5 * x;
  double sum = term;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * (k + order));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

double bessel_i_asymptotic(int order, double x) {
  check_order(order);
  if (!(x > 0.0)) throw std::domain_error("asymptotic branch needs x > 0");
  const double mu = 4.0 * order * order;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double next = -term * (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (8.0 * k * x);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return std::exp(x) / std::sqrt(2.0 * std::numbers::pi * x) * sum;
}

double bessel_i(int order, double x) {
  check_order(order);
  if (x < 0.0 || std::isnan(x)) throw std::domain_error("bessel argument must be non-negative");
  return x <= kSeriesLimit ? bessel_i_series(order, x) : bessel_i_asymptotic(order, x);
}

double bessel_i1_over_x(double x) {
  if (x < 0.0) throw std::domain_error("bessel argument must be non-negative");
  if (x > 1.0) return bessel_i(1, x) / x;
  const double q = 0.25 * x * x;
  double term = 0.5;
  double sum = term;
  for (int k = 1; k < 60; ++k) {
    term *= q / (static_cast<double>(k) * (k + 1));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

namespace {

using GL = boost::math::quadrature::gauss<double, 15>;

double gl_panel(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  const auto& xs = GL::abscissa();
  const auto& ws = GL::weights();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] == 0.0) {
      s += ws[i] * f(c);
    } else {
      s += ws[i] * (f(c - h * xs[i]) + f(c + h * xs[i]));
    }
  }
  return s * h;
}

double adapt(const std::function<double(double)>& f, double a, double b, double whole, double tol,
             int depth, double& worst) {
  const double m = 0.5 * (a + b);
  const double left = gl_panel(f, a, m);
  const double right = gl_panel(f, m, b);
  const double err = std::abs(left + right - whole);
  if (err <= tol) return left + right;
  if (depth >= 40) {
    worst = std::max(worst, err);
    return left + right;
  }
  return adapt(f, a, m, left, 0.5 * tol, depth + 1, worst) +
         adapt(f, m, b, right, 0.5 * tol, depth + 1, worst);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (b <= a) return 0.0;
  constexpr int kPanels = 16;
  const double h = (b - a) / kPanels;
  double total = 0.0, worst = 0.0;
  for (int i = 0; i < kPanels; ++i) {
    const double lo = a + i * h, hi = (i + 1 == kPanels) ? b : lo + h;
    total += adapt(f, lo, hi, gl_panel(f, lo, hi), tol / kPanels, 0, worst);
  }
  if (worst > tol) {
    std::ostringstream msg;
    msg << "quadrature did not converge: achieved " << worst << " vs tolerance " << tol;
    throw NumericError(msg.str());
  }
  return total;
}

void TelegraphParams::validate() const {
  if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0)) throw ConfigError("rate must be non-negative");
}

double telegraph_solution(const TelegraphParams& p, const InitialData1D& init, double t, double x,
                          double tol) {
  p.validate();
  if (t < 0.0) throw std::domain_error("telegraph time must be non-negative");
  if (!init.f || !init.g) throw ConfigError("telegraph initial data incomplete");
  if (t == 0.0) return init.f(x);
  const double kappa = p.kappa();
  const double c = 0.5 * p.gamma2;
  const double damp = std::exp(-0.5 * kappa * t);
  const double lo = std::max(x - t, init.lo);
  const double hi = std::min(x + t, init.hi);
  auto z_of = [&](double y) { return std::sqrt(std::max(0.0, t * t - (x - y) * (x - y))); };
  double value = 0.5 * damp * (init.f(x + t) + init.f(x - t));
  if (hi > lo) {
    if (c > 0.0) {
      const double i1 = integrate(
          [&](double y) { return c * bessel_i1_over_x(c * z_of(y)) * init.f(y); }, lo, hi, tol);
      value += c * 0.5 * t * damp * i1;
    }
    const double i0 = integrate(
        [&](double y) {
          return bessel_i(0, c * z_of(y)) * (init.g(y) + 0.5 * kappa * init.f(y));
        },
        lo, hi, tol);
    value += 0.5 * damp * i0;
  }
  return value;
}

Mat2 dirac_hamiltonian(double p, double m) {
  Mat2 h;
  h << -p, m, m, p;
  return h;
}

double dispersion(double p, double m) { return std::sqrt(p * p + m * m); }

EigenPair eigenvectors(double p, double m) {
  EigenPair e;
  if (m == 0.0) {
    // h = -sigma3 p: R has energy p, L has energy -p.
    const Vec2 L(1.0, 0.0), R(0.0, 1.0);
    e.plus = p >= 0.0 ? R : L;
    e.minus = p >= 0.0 ? L : R;
    e.chirality_fallback = true;
    return e;
  }
  const double E = dispersion(p, m);
  e.plus = Vec2(1.0, (E + p) / m);
  e.minus = Vec2(1.0, (-E + p) / m);
  return e;
}

double group_velocity(double p0, double m) {
  if (m == 0.0) return p0 > 0.0 ? 1.0 : (p0 < 0.0 ? -1.0 : 0.0);
  return p0 / dispersion(p0, m);
}

double limit_position(double v_g, double gamma) {
  if (v_g == 0.0 || gamma == 0.0) throw std::domain_error("limit position needs v_g, gamma != 0");
  return 1.0 / (v_g * gamma);
}

std::vector<double> momentum_grid(const PdeGrid& g) {
  std::vector<double> p(g.n);
  const double dp = 2.0 * std::numbers::pi / (g.n * g.dx);
  for (int k = 0; k < g.n; ++k) p[k] = dp * (k <= (g.n - 1) / 2 ? k : k - g.n);
  return p;
}

namespace {

// In-place unnormalized 1D DFT of each spinor component; sign as in FFTW.
void dft_spinor(std::vector<Vec2>& a, int sign) {
  const int n = static_cast<int>(a.size());
  std::vector<cplx> buf(n);
  fftw_plan plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(buf.data()),
                                    reinterpret_cast<fftw_complex*>(buf.data()), sign,
                                    FFTW_ESTIMATE);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < n; ++i) buf[i] = a[i](c);
    fftw_execute(plan);
    for (int i = 0; i < n; ++i) a[i](c) = buf[i];
  }
  fftw_destroy_plan(plan);
}

double gaussian_density(double u, double sigma) {
  return std::exp(-0.5 * u * u / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

std::vector<Vec2> to_position(const std::vector<Vec2>& amp, const PdeGrid& g) {
  const auto p = momentum_grid(g);
  const double pref = (2.0 * std::numbers::pi / (g.n * g.dx)) / std::sqrt(2.0 * std::numbers::pi);
  std::vector<Vec2> a(g.n);
  for (int k = 0; k < g.n; ++k) a[k] = pref * std::polar(1.0, p[k] * g.x_min) * amp[k];
  dft_spinor(a, FFTW_BACKWARD);
  return a;
}

std::vector<Vec2> to_momentum(const std::vector<Vec2>& psi, const PdeGrid& g) {
  const auto p = momentum_grid(g);
  std::vector<Vec2> a = psi;
  dft_spinor(a, FFTW_FORWARD);
  const double pref = g.dx / std::sqrt(2.0 * std::numbers::pi);
  for (int k = 0; k < g.n; ++k) a[k] *= pref * std::polar(1.0, -p[k] * g.x_min);
  return a;
}

PacketState build_packet(double p0, double sigma, double m, const PdeGrid& grid) {
  if (!(sigma > 0.0)) throw ConfigError("packet sigma must be positive");
  const double nyquist = std::numbers::pi / grid.dx;
  if (std::abs(p0) + 6.0 * sigma >= nyquist) {
    throw ConfigError("grid bandwidth too small for packet momenta up to p0 + 6 sigma");
  }
  PacketState ps;
  ps.grid = grid;
  ps.packet = {p0, sigma, m, 0.0};
  auto weight = [&](double p) {
    return gaussian_density(p - p0, sigma) * eigenvectors(p, m).plus.squaredNorm();
  };
  const double integral = integrate(weight, p0 - 14.0 * sigma, p0 + 14.0 * sigma, 1e-13);
  ps.packet.norm = 1.0 / integral;
  ps.momenta = momentum_grid(grid);
  ps.amplitude.resize(grid.n);
  for (int k = 0; k < grid.n; ++k) {
    const double p = ps.momenta[k];
    const double beta = std::sqrt(ps.packet.norm * gaussian_density(p - p0, sigma));
    ps.amplitude[k] = beta * eigenvectors(p, m).plus;
  }
  ps.psi = to_position(ps.amplitude, grid);
  return ps;
}

std::vector<Vec2> free_evolve(const PacketState& packet, double t) {
  std::vector<Vec2> amp = packet.amplitude;
  for (std::size_t k = 0; k < amp.size(); ++k) {
    amp[k] *= std::polar(1.0, -dispersion(packet.momenta[k], packet.packet.m) * t);
  }
  return to_position(amp, packet.grid);
}

EnergyContent energy_content(const std::vector<Vec2>& psi, const PdeGrid& g, double m) {
  const auto amp = to_momentum(psi, g);
  const auto p = momentum_grid(g);
  const double dp = 2.0 * std::numbers::pi / (g.n * g.dx);
  EnergyContent e;
  for (int k = 0; k < g.n; ++k) {
    const EigenPair v = eigenvectors(p[k], m);
    const Vec2 up = v.plus.normalized(), um = v.minus.normalized();
    e.positive += std::norm(up.dot(amp[k])) * dp;
    e.negative += std::norm(um.dot(amp[k])) * dp;
  }
  return e;
}

double spinor_norm(const std::vector<Vec2>& psi, const PdeGrid& g) {
  double s = 0.0;
  for (const auto& v : psi) s += v.squaredNorm();
  return s * g.dx;
}

double spinor_mean(const std::vector<Vec2>& psi, const PdeGrid& g) {
  double s = 0.0;
  for (int i = 0; i < g.n; ++i) s += g.x(i) * psi[i].squaredNorm();
  return s * g.dx;
}

double spinor_second_moment(const std::vector<Vec2>& psi, const PdeGrid& g) {
  double s = 0.0;
  for (int i = 0; i < g.n; ++i) s += g.x(i) * g.x(i) * psi[i].squaredNorm();
  return s * g.dx;
}

double spinor_mean_momentum(const std::vector<Vec2>& psi, const PdeGrid& g) {
  const auto amp = to_momentum(psi, g);
  const auto p = momentum_grid(g);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < g.n; ++k) {
    num += p[k] * amp[k].squaredNorm();
    den += amp[k].squaredNorm();
  }
  return num / den;
}

Mat4 momentum_generator(double p, double q, const GeneratorParams& par) {
  Mat4 G = Mat4::Zero();
  const cplx d = kI * (p - q);
  const double s = p + q;
  G(0, 3) = d;
  G(1, 1) = -par.gamma1;
  G(1, 2) = s;
  G(2, 1) = -s;
  G(2, 2) = -(par.gamma1 + par.gamma2);
  G(2, 3) = -2.0 * par.mass;
  G(3, 0) = d;
  G(3, 2) = 2.0 * par.mass;
  G(3, 3) = -par.gamma2;
  return G;
}

template <class M>
M matrix_exp(const M& a) {
  constexpr int q = 6;
  double c[q + 1];
  c[0] = 1.0;
  for (int k = 1; k <= q; ++k) c[k] = c[k - 1] * (q - k + 1) / (static_cast<double>(k) * (2 * q - k + 1));
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw NumericError("matrix exponential of non-finite matrix");
  int s = 0;
  if (norm1 > 0.5) s = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  if (s > 1000) throw NumericError("matrix exponential scaling did not converge");
  const M x = a / std::ldexp(1.0, s);
  const M id = M::Identity(a.rows(), a.cols());
  M num = c[0] * id, den = c[0] * id, pw = id;
  for (int k = 1; k <= q; ++k) {
    pw = (pw * x).eval();
    num += c[k] * pw;
    den += ((k % 2) ? -c[k] : c[k]) * pw;
  }
  M e = den.partialPivLu().solve(num);
  for (int i = 0; i < s; ++i) e = (e * e).eval();
  if (!e.allFinite()) throw NumericError("matrix exponential produced non-finite values");
  return e;
}

template Mat2 matrix_exp<Mat2>(const Mat2&);
template Mat4 matrix_exp<Mat4>(const Mat4&);
template Eigen::MatrixXcd matrix_exp<Eigen::MatrixXcd>(const Eigen::MatrixXcd&);

namespace {

// Transforms each row along j with `sign_j`, then each column along i with `sign_i`.
void dft_2d(std::vector<cplx>& a, int n, int sign_i, int sign_j) {
  auto* d = reinterpret_cast<fftw_complex*>(a.data());
  int len[1] = {n};
  fftw_plan rows = fftw_plan_many_dft(1, len, n, d, nullptr, 1, n, d, nullptr, 1, n, sign_j,
                                      FFTW_ESTIMATE);
  fftw_plan cols = fftw_plan_many_dft(1, len, n, d, nullptr, n, 1, d, nullptr, n, 1, sign_i,
                                      FFTW_ESTIMATE);
  fftw_execute(rows);
  fftw_execute(cols);
  fftw_destroy_plan(rows);
  fftw_destroy_plan(cols);
}

}  // namespace

PauliField fourier_propagate(const PauliField& init, const GeneratorParams& par, double t) {
  par.validate();
  if (t < 0.0) throw ConfigError("propagation time must be non-negative");
  const int n = init.grid.n;
  PauliField out = init;
  if (t == 0.0) return out;
  // r~_ab = sum r(x_j, x_l) e^{-i p_a x_j} e^{+i q_b x_l}
  for (auto& plane : out.c) dft_2d(plane, n, FFTW_FORWARD, FFTW_BACKWARD);
  const auto k = momentum_grid(init.grid);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const Mat4 E = matrix_exp<Mat4>(t * momentum_generator(k[a], k[b], par));
      const std::size_t idx = out.idx(a, b);
      Vec4 r(out.c[0][idx], out.c[1][idx], out.c[2][idx], out.c[3][idx]);
      r = E * r;
      for (int mu = 0; mu < 4; ++mu) out.c[mu][idx] = r(mu);
    }
  }
  const double scale = 1.0 / (static_cast<double>(n) * n);
  for (auto& plane : out.c) {
    dft_2d(plane, n, FFTW_BACKWARD, FFTW_FORWARD);
    for (auto& z : plane) z *= scale;
  }
  return out;
}

DiagonalFields fourier_propagate_diagonal(const DiagonalFields& init, const GeneratorParams& par,
                                          double t) {
  par.validate();
  if (par.mass != 0.0) throw ConfigError("diagonal Fourier reduction requires m = 0");
  const int n = init.grid.n;
  std::vector<Vec2> a(n);
  for (int i = 0; i < n; ++i) a[i] = Vec2(init.R[0][i], init.R[3][i]);
  dft_spinor(a, FFTW_FORWARD);
  const auto k = momentum_grid(init.grid);
  for (int j = 0; j < n; ++j) {
    Mat2 g;
    g << 0.0, kI * k[j], kI * k[j], -par.gamma2;
    a[j] = matrix_exp<Mat2>(t * g) * a[j];
  }
  dft_spinor(a, FFTW_BACKWARD);
  DiagonalFields out;
  out.grid = init.grid;
  out.t = init.t + t;
  for (auto& R : out.R) R.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    out.R[0][i] = a[i](0).real() / n;
    out.R[3][i] = a[i](1).real() / n;
    out.max_imag = std::max({out.max_imag, std::abs(a[i](0).imag() / n), std::abs(a[i](1).imag() / n)});
  }
  return out;
}

}  // namespace qrw
