#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "qrw/fields.hpp"
#include "qrw/lindblad.hpp"

namespace qrw {

// Modified Bessel functions of the first kind, orders 0 and 1, x >= 0.
double bessel_i(int order, double x);
double bessel_i_series(int order, double x);
double bessel_i_asymptotic(int order, double x);
// I1(x)/x, finite at x = 0.
double bessel_i1_over_x(double x);

// Adaptive Gauss-Legendre with bisection; throws NumericError when `tol` is not reached.
double integrate(const std::function<double(double)>& f, double a, double b, double tol);

struct TelegraphParams {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double kappa() const { return 2.0 * gamma1 + gamma2; }
  double b() const { return -gamma1 * (gamma1 + gamma2); }
  void validate() const;
};

// F(0, x) = f(x), d_t F(0, x) = g(x); both vanish outside [lo, hi].
struct InitialData1D {
  std::function<double(double)> f;
  std::function<double(double)> g;
  double lo = -1.0;
  double hi = 1.0;
};

// Solution of F_tt + kappa F_t - F_xx - b F = 0 via the Riemann function I0.
double telegraph_solution(const TelegraphParams& p, const InitialData1D& init, double t, double x,
                          double tol = 1e-8);

Mat2 dirac_hamiltonian(double p, double m);
double dispersion(double p, double m);

struct EigenPair {
  Vec2 plus;
  Vec2 minus;
  bool chirality_fallback = false;
};
// V+- = (1, (+-E + p)/m); at m = 0 the chirality basis, flagged.
EigenPair eigenvectors(double p, double m);

double group_velocity(double p0, double m);
double limit_position(double v_g, double gamma);

struct DiracWavepacket {
  double p0 = 0.0;
  double sigma = 1.0;
  double m = 1.0;
  double norm = 0.0;  // N with N * int g |V+|^2 dp = 1
};

// Momentum amplitudes A(p) = beta(p - p0) V+_p and the sampled position amplitude.
struct PacketState {
  DiracWavepacket packet;
  PdeGrid grid;
  std::vector<double> momenta;   // FFT order, spacing 2 pi / (n dx)
  std::vector<Vec2> amplitude;   // A(p_k)
  std::vector<Vec2> psi;         // Psi(x_i), sum |Psi|^2 dx = 1
};

std::vector<double> momentum_grid(const PdeGrid& g);
PacketState build_packet(double p0, double sigma, double m, const PdeGrid& grid);
std::vector<Vec2> free_evolve(const PacketState& packet, double t);

// Continuum transforms between Psi(x_i) and Psi~(p_k) on a periodic grid.
std::vector<Vec2> to_position(const std::vector<Vec2>& amp, const PdeGrid& g);
std::vector<Vec2> to_momentum(const std::vector<Vec2>& psi, const PdeGrid& g);

struct EnergyContent {
  double positive = 0.0;  // int |alpha+|^2 |V+|^2 dp
  double negative = 0.0;
};
EnergyContent energy_content(const std::vector<Vec2>& psi, const PdeGrid& g, double m);

double spinor_norm(const std::vector<Vec2>& psi, const PdeGrid& g);
double spinor_mean(const std::vector<Vec2>& psi, const PdeGrid& g);
double spinor_second_moment(const std::vector<Vec2>& psi, const PdeGrid& g);
double spinor_mean_momentum(const std::vector<Vec2>& psi, const PdeGrid& g);

// Generator of d_t r~_pq for r ~ exp(i (p x - q x')).
Mat4 momentum_generator(double p, double q, const GeneratorParams& par);

// Scaling and squaring with a [6/6] Pade approximant.
template <class M>
M matrix_exp(const M& a);

PauliField fourier_propagate(const PauliField& init, const GeneratorParams& par, double t);
// Massless diagonal reduction: (R0, R3) evolve per wavenumber k = p - q.
DiagonalFields fourier_propagate_diagonal(const DiagonalFields& init, const GeneratorParams& par,
                                          double t);

}  // namespace qrw
