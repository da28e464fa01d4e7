#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qrw/analytic.hpp"
#include "qrw/lindblad.hpp"
#include "qrw/observables.hpp"

using namespace qrw;

namespace {

constexpr double kPi = std::numbers::pi;

// Power series in long double; every term is positive.
double series_oracle(int order, double x) {
  long double term = order == 0 ? 1.0L : 0.5L * x;
  long double sum = term;
  const long double q = 0.25L * x * x;
  for (int k = 1; k < 400; ++k) {
    term *= q / (static_cast<long double>(k) * (k + order));
    sum += term;
    if (term < 1e-22L * sum) break;
  }
  return static_cast<double>(sum);
}

double gauss(double x, double w) {
  return std::exp(-x * x / (2 * w * w)) / std::sqrt(2 * kPi * w * w);
}

std::vector<Vec2> sample(const PdeGrid& g, double w, const Vec2& c) {
  std::vector<Vec2> psi(g.n);
  for (int i = 0; i < g.n; ++i) {
    const double x = g.x(i);
    psi[i] = (std::exp(-x * x / (4 * w * w)) / std::pow(2 * kPi * w * w, 0.25)) * c;
  }
  return psi;
}

}  // namespace

TEST_CASE("Bessel functions") {
  CHECK(bessel_i(0, 0.0) == 1.0);
  CHECK(bessel_i(1, 0.0) == 0.0);
  CHECK(bessel_i(0, 1.0) == doctest::Approx(1.2660658777520082).epsilon(1e-14));
  for (double x : {1e-6, 0.3, 1.0, 4.5, 10.0, 14.99, 15.01, 22.0, 40.0, 80.0}) {
    for (int order : {0, 1}) {
      CHECK(std::abs(bessel_i(order, x) / series_oracle(order, x) - 1.0) <= 1e-12);
    }
  }
  for (int order : {0, 1}) {
    const double s = bessel_i_series(order, 15.0), a = bessel_i_asymptotic(order, 15.0);
    CHECK(std::abs(s / a - 1.0) <= 1e-11);
  }
  CHECK(bessel_i1_over_x(0.0) == 0.5);
  CHECK(bessel_i1_over_x(2.0) == doctest::Approx(series_oracle(1, 2.0) / 2.0).epsilon(1e-13));
  CHECK_THROWS(bessel_i(0, -1.0));
}

TEST_CASE("adaptive quadrature") {
  CHECK(integrate([](double x) { return std::sin(x); }, 0.0, kPi, 1e-12) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(integrate([](double x) { return gauss(x, 0.3); }, -5.0, 5.0, 1e-12) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(integrate([](double) { return 1.0; }, 2.0, 2.0, 1e-12) == 0.0);
}

TEST_CASE("telegraph solution limits") {
  const double w = 0.5;
  InitialData1D d;
  d.f = [w](double x) { return gauss(x, w); };
  d.g = [w](double x) { return -x / (w * w) * gauss(x, w) * 0.3; };
  d.lo = -8.0;
  d.hi = 8.0;
  const TelegraphParams free{0.0, 0.0};
  for (double x : {-2.0, -0.3, 0.0, 1.1}) {
    CHECK(telegraph_solution(free, d, 0.0, x) == doctest::Approx(d.f(x)).epsilon(1e-14));
    const double t = 1.7;
    // g = 0.3 f', so the integral of g over [x - t, x + t] is 0.3 (f(x + t) - f(x - t)).
    const double expect = 0.5 * (d.f(x + t) + d.f(x - t)) + 0.15 * (d.f(x + t) - d.f(x - t));
    CHECK(telegraph_solution(free, d, t, x) == doctest::Approx(expect).epsilon(1e-9));
  }
  CHECK_THROWS(TelegraphParams{-0.1, 0.0}.validate());
}

TEST_CASE("telegraph solution satisfies the telegraph equation") {
  const TelegraphParams p{0.3, 0.5};
  CHECK(p.kappa() == doctest::Approx(1.1));
  CHECK(p.b() == doctest::Approx(-0.24));
  InitialData1D d;
  d.f = [](double x) { return gauss(x, 0.6); };
  d.g = [](double x) { return 0.2 * gauss(x - 0.3, 0.5); };
  d.lo = -10.0;
  d.hi = 10.0;
  const double h = 0.02;
  for (double x : {-1.0, 0.2, 1.5}) {
    const double t = 2.0;
    auto F = [&](double tt, double xx) { return telegraph_solution(p, d, tt, xx, 1e-12); };
    const double ftt = (F(t + h, x) - 2 * F(t, x) + F(t - h, x)) / (h * h);
    const double ft = (F(t + h, x) - F(t - h, x)) / (2 * h);
    const double fxx = (F(t, x + h) - 2 * F(t, x) + F(t, x - h)) / (h * h);
    CHECK(std::abs(ftt + p.kappa() * ft - fxx - p.b() * F(t, x)) < 1e-3);
  }
}

TEST_CASE("telegraph solution matches the diagonal fast path") {
  const double w = 0.5, T = 5.0;
  const PdeGrid g = PdeGrid::symmetric(12.0, 0.01);
  // Left-moving chirality: R0 = f, R3 = f, and d_t R0 = d_x R3 = f'.
  const auto psi = sample(g, w, Vec2(1.0, 0.0));
  std::vector<double> r0(g.n), r3(g.n);
  for (int i = 0; i < g.n; ++i) r0[i] = r3[i] = psi[i].squaredNorm();
  DiagonalSolver s(g, g.dx, GeneratorParams{0.0, 0.0, 0.5});
  s.set(r0, r3);
  s.advance(step_count(T, g.dx));
  const DiagonalFields d = s.fields(T);
  InitialData1D data;
  data.f = [w](double x) { return gauss(x, w); };
  data.g = [w](double x) { return -x / (w * w) * gauss(x, w); };
  data.lo = -6.0;
  data.hi = 6.0;
  const int c = (g.n - 1) / 2;
  CHECK(std::abs(telegraph_solution({0.0, 0.5}, data, T, 0.0) - d.R[0][c]) <= 1e-3);
}

TEST_CASE("dispersion and eigenvectors") {
  CHECK(dispersion(0.0, 3.0) == 3.0);
  const EigenPair e = eigenvectors(0.0, 3.0);
  CHECK(std::abs(e.plus(0) - 1.0) < 1e-15);
  CHECK(std::abs(e.plus(1) - 1.0) < 1e-15);
  CHECK_FALSE(e.chirality_fallback);
  CHECK(dispersion(5.0, 0.5) == doctest::Approx(5.02494).epsilon(1e-6));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int k = 0; k < 100; ++k) {
    const double p = u(rng), m = u(rng);
    const EigenPair v = eigenvectors(p, m);
    const Mat2 h = dirac_hamiltonian(p, m);
    const double E = dispersion(p, m);
    CHECK((h * v.plus - E * v.plus).norm() <= 1e-13 * v.plus.norm() * std::max(1.0, E));
    CHECK((h * v.minus + E * v.minus).norm() <= 1e-13 * v.minus.norm() * std::max(1.0, E));
  }
  CHECK(eigenvectors(1.0, 0.0).chirality_fallback);
}

TEST_CASE("group velocity and limit position") {
  CHECK(group_velocity(1.0, 3.0) == doctest::Approx(0.31623).epsilon(1e-5));
  CHECK(group_velocity(5.0, 0.5) == doctest::Approx(0.99504).epsilon(1e-5));
  CHECK(group_velocity(2.0, 0.0) == 1.0);
  CHECK(limit_position(0.995037, 0.5) == doctest::Approx(2.0101).epsilon(1e-4));
  CHECK(limit_position(0.316, 0.05) == doctest::Approx(63.29).epsilon(1e-4));
  CHECK(limit_position(1.0, 0.25) == doctest::Approx(4.0));
  CHECK_THROWS(limit_position(0.0, 0.5));
}

TEST_CASE("positive-energy wavepacket") {
  const PdeGrid g = PdeGrid::symmetric(60.0, 0.05);
  const PacketState ps = build_packet(1.0, 0.1, 3.0, g);
  CHECK(spinor_norm(ps.psi, g) == doctest::Approx(1.0).epsilon(1e-10));
  // <p> is weighted by |V+_p|^2, which is not unit normalized.
  double num = 0.0, den = 0.0;
  for (int k = -4000; k <= 4000; ++k) {
    const double p = 1.0 + 1.4 * k / 4000.0;
    const double w = std::exp(-(p - 1.0) * (p - 1.0) / (2 * 0.01)) *
                     eigenvectors(p, 3.0).plus.squaredNorm();
    num += p * w;
    den += w;
  }
  CHECK(spinor_mean_momentum(ps.psi, g) == doctest::Approx(num / den).epsilon(1e-8));
  CHECK(num / den > 1.0);
  const EnergyContent e = energy_content(ps.psi, g, 3.0);
  CHECK(e.negative <= 1e-10);
  CHECK(e.positive == doctest::Approx(1.0).epsilon(1e-10));

  const double dt = 0.01;
  const double v = (spinor_mean(free_evolve(ps, dt), g) - spinor_mean(free_evolve(ps, 0.0), g)) / dt;
  CHECK(v == doctest::Approx(0.316).epsilon(0.01));

  const auto same = free_evolve(ps, 0.0);
  for (int i = 0; i < g.n; ++i) CHECK((same[i] - ps.psi[i]).norm() < 1e-14);

  CHECK_THROWS_AS(build_packet(1.0, 0.0, 3.0, g), ConfigError);
  CHECK_THROWS_AS(build_packet(60.0, 1.0, 3.0, g), ConfigError);
}

TEST_CASE("free packet moves at the group velocity") {
  const PdeGrid g = PdeGrid::symmetric(40.0, 0.05);
  const double p0 = 5.0, m = 0.5;
  const PacketState ps = build_packet(p0, 0.5, m, g);
  const double vg = group_velocity(p0, m);
  const double x0 = spinor_mean(ps.psi, g);
  for (double t : {1.0, 4.0, 10.0}) {
    const auto psi = free_evolve(ps, t);
    CHECK(std::abs(spinor_norm(psi, g) - 1.0) <= 1e-12);
    CHECK(std::abs((spinor_mean(psi, g) - x0) / (vg * t) - 1.0) < 0.01);
  }
}

TEST_CASE("matrix exponential") {
  CHECK((matrix_exp(Mat4(Mat4::Zero())) - Mat4::Identity()).norm() == 0.0);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  for (double scale : {0.1, 1.0, 8.0}) {
    Mat4 a;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) a(i, j) = scale * cplx(nd(rng), nd(rng));
    }
    Eigen::ComplexEigenSolver<Mat4> es(a);
    const Mat4 v = es.eigenvectors();
    const Mat4 ref = v * es.eigenvalues().array().exp().matrix().asDiagonal() * v.inverse();
    CHECK((matrix_exp(a) - ref).norm() <= 1e-10 * ref.norm());
  }
}

TEST_CASE("momentum generator") {
  // Noiseless: the generator is anti-Hermitian, so exp(G t) is unitary.
  for (double m : {0.0, 0.7}) {
    const Mat4 G = momentum_generator(1.3, -0.4, GeneratorParams{m, 0.0, 0.0});
    const auto ev = G.eigenvalues();
    for (int k = 0; k < 4; ++k) CHECK(std::abs(ev(k).real()) < 1e-12);
    const Mat4 E = matrix_exp(Mat4(2.5 * G));
    CHECK((E.adjoint() * E - Mat4::Identity()).norm() < 1e-12);
  }
  const Mat4 G = momentum_generator(0.8, 0.2, GeneratorParams{0.5, 0.3, 0.5});
  const auto ev = G.eigenvalues();
  for (int k = 0; k < 4; ++k) CHECK(ev(k).real() <= 1e-12);
}

TEST_CASE("Fourier propagators agree with the split-step solvers") {
  const PdeGrid g = PdeGrid::symmetric(8.0, 0.05);
  const auto psi = sample(g, 0.5, Vec2(0.8, 0.6));
  const GeneratorParams p0{0.0, 0.2, 0.5};
  const DiagonalFields init = extract_diagonal(pauli_from_spinor(psi, g));
  const DiagonalFields fo = fourier_propagate_diagonal(init, p0, 2.0);
  DiagonalSolver s(g, g.dx, p0);
  s.set(init.R[0], init.R[3]);
  s.advance(step_count(2.0, g.dx));
  const DiagonalFields st = s.fields(2.0);
  double diag = 0.0;
  for (int i = 0; i < g.n; ++i) diag = std::max(diag, std::abs(fo.R[0][i] - st.R[0][i]));
  CHECK(diag < 1e-3);

  const PdeGrid h = PdeGrid::symmetric(4.0, 0.05);
  const PauliField r = pauli_from_spinor(sample(h, 0.5, Vec2(0.8, 0.6)), h);
  const GeneratorParams pm{0.7, 0.2, 0.5};
  const PauliField a = fourier_propagate(r, pm, 1.0);
  const PauliField b = evolve(r, pm, 1.0, h.dx).snapshots.back();
  double full = 0.0;
  for (int mu = 0; mu < 4; ++mu) {
    for (std::size_t c = 0; c < a.c[mu].size(); ++c) full = std::max(full, std::abs(a.c[mu][c] - b.c[mu][c]));
  }
  CHECK(full < 1e-3);
  CHECK(a.trace() == doctest::Approx(1.0).epsilon(1e-10));
  const PauliField z = fourier_propagate(r, pm, 0.0);
  for (int mu = 0; mu < 4; ++mu) {
    for (std::size_t c = 0; c < r.c[mu].size(); ++c) CHECK(std::abs(z.c[mu][c] - r.c[mu][c]) < 1e-13);
  }
}
