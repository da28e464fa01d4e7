#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qrw/lindblad.hpp"
#include "qrw/observables.hpp"

using namespace qrw;

namespace {

double max_abs(const Mat4& m) { return m.cwiseAbs().maxCoeff(); }

std::vector<Vec2> gaussian(const PdeGrid& g, double w, double p0, const Vec2& c) {
  std::vector<Vec2> psi(g.n);
  for (int i = 0; i < g.n; ++i) {
    const double x = g.x(i);
    const double a = std::exp(-x * x / (4 * w * w)) / std::pow(2 * std::numbers::pi * w * w, 0.25);
    psi[i] = (a * std::polar(1.0, p0 * x)) * c;
  }
  return psi;
}

const Vec2 kSym = Vec2(1.0, 1.0) / std::sqrt(2.0);

double field_diff(const FourPlanes& a, const FourPlanes& b) {
  double d = 0.0;
  for (int mu = 0; mu < 4; ++mu) {
    for (std::size_t k = 0; k < a.c[mu].size(); ++k) d = std::max(d, std::abs(a.c[mu][k] - b.c[mu][k]));
  }
  return d;
}

}  // namespace

TEST_CASE("Pauli decomposition of simple blocks") {
  const LatticeGrid lg(4, 1.0, 0.0);
  DensityGrid rho(lg);
  const cplx f(0.3, -0.2);
  rho.at(1, 2) << f, 0.0, 0.0, 0.0;
  PauliField r = pauli_from_density(rho);
  CHECK(std::abs(r.at(0, 1, 2) - f) < 1e-15);
  CHECK(std::abs(r.at(1, 1, 2)) < 1e-15);
  CHECK(std::abs(r.at(2, 1, 2)) < 1e-15);
  CHECK(std::abs(r.at(3, 1, 2) - f) < 1e-15);

  rho.at(1, 2) << 0.0, f, 0.0, 0.0;
  r = pauli_from_density(rho);
  CHECK(std::abs(r.at(0, 1, 2)) < 1e-15);
  CHECK(std::abs(r.at(1, 1, 2) - f) < 1e-15);
  CHECK(std::abs(r.at(2, 1, 2) - kI * f) < 1e-15);
  CHECK(std::abs(r.at(3, 1, 2)) < 1e-15);
}

TEST_CASE("Pauli round trip") {
  const LatticeGrid lg(5, 0.2, -0.4);
  DensityGrid rho(lg);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j <= i; ++j) {
      Mat2 b;
      b << cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng)),
          cplx(nd(rng), nd(rng));
      if (i == j) b = (0.5 * (b + b.adjoint())).eval();
      rho.at(i, j) = b;
      rho.at(j, i) = b.adjoint();
    }
  }
  const DensityGrid back = density_from_pauli(pauli_from_density(rho));
  CHECK((back.dense() - rho.dense()).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(pauli_from_density(rho).hermiticity_error() < 1e-13);
}

TEST_CASE("characteristic transform") {
  const Mat4& U = unitary_U();
  CHECK(max_abs(U * U.adjoint() - Mat4::Identity()) <= 1e-15);
  Mat4 lam = Mat4::Zero(), lamp = Mat4::Zero();
  for (int mu = 0; mu < 4; ++mu) {
    lam(mu, mu) = characteristic_speeds(mu)[0];
    lamp(mu, mu) = characteristic_speeds(mu)[1];
  }
  CHECK(max_abs(U * jacobian_A() * U.adjoint() - lam) <= 1e-14);
  CHECK(max_abs(U * jacobian_Aprime() * U.adjoint() - lamp) <= 1e-14);
  CHECK(lam(0, 0) == -1.0);
  CHECK(lam(1, 1) == -1.0);
  CHECK(lam(2, 2) == 1.0);
  CHECK(lam(3, 3) == 1.0);

  Vec4 r(1.0, 0.0, 0.0, 0.0);
  const Vec4 v = U * r;
  CHECK(std::abs(v(0) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(v(1)) < 1e-15);
  CHECK(std::abs(v(2)) < 1e-15);
  CHECK(std::abs(v(3) + 1.0 / std::sqrt(2.0)) < 1e-15);

  const PdeGrid g = PdeGrid::symmetric(1.0, 0.25);
  const PauliField p = pauli_from_spinor(gaussian(g, 0.4, 1.0, kSym), g);
  CHECK(field_diff(v_inverse(v_transform(p)), p) < 1e-15);
}

TEST_CASE("exact advection") {
  const PdeGrid g(8, 0.1, 0.0);
  CharacteristicField v(g);
  v.at(0, 3, 5) = 1.0;
  v.at(1, 3, 5) = 2.0;
  v.at(2, 3, 5) = 3.0;
  v.at(3, 3, 5) = 4.0;
  CharacteristicField w = homogeneous_step(v, g.dx);
  CHECK(w.at(0, 2, 4) == cplx(1.0));
  CHECK(w.at(1, 2, 6) == cplx(2.0));
  CHECK(w.at(2, 4, 4) == cplx(3.0));
  CHECK(w.at(3, 4, 6) == cplx(4.0));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (auto& p : v.c) {
    for (auto& z : p) z = cplx(nd(rng), nd(rng));
  }
  CharacteristicField u = v;
  for (int k = 0; k < g.n; ++k) {
    apply_shift(u);
    for (int mu = 0; mu < 4; ++mu) {
      cplx a = 0.0, b = 0.0;
      for (std::size_t c = 0; c < u.c[mu].size(); ++c) {
        a += u.c[mu][c];
        b += v.c[mu][c];
      }
      CHECK(std::abs(a - b) < 1e-12);
    }
  }
  CHECK(field_diff(u, v) == 0.0);
  CHECK_THROWS_AS(homogeneous_step(v, 0.05), ConfigError);
}

TEST_CASE("source step") {
  const PdeGrid g(6, 0.01, 0.0);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  CharacteristicField v(g);
  for (auto& p : v.c) {
    for (auto& z : p) z = cplx(nd(rng), nd(rng));
  }
  CHECK(field_diff(source_step(v, g.dx, GeneratorParams{}), v) == 0.0);

  const double dt = 0.01, g1 = 0.3, g2 = 0.5;
  const PauliField r = v_inverse(v);
  const PauliField s = v_inverse(source_step(v, dt, GeneratorParams{0.0, g1, g2}));
  for (std::size_t c = 0; c < r.c[0].size(); ++c) {
    CHECK(std::abs(s.c[0][c] - r.c[0][c]) < 1e-14);
    CHECK(std::abs(s.c[1][c] - std::exp(-g1 * dt) * r.c[1][c]) < dt * dt * std::abs(r.c[1][c]));
    CHECK(std::abs(s.c[3][c] - std::exp(-g2 * dt) * r.c[3][c]) < dt * dt * std::abs(r.c[3][c]));
  }
  CHECK_THROWS_AS(GeneratorParams({0.0, -1.0, 0.0}).validate(), ConfigError);
}

TEST_CASE("trace and hermiticity over 1000 steps") {
  const PdeGrid g = PdeGrid::symmetric(3.0, 0.05);
  const PauliField init = pauli_from_spinor(gaussian(g, 0.4, 2.0, Vec2(0.8, 0.6)), g);
  CHECK(init.trace() == doctest::Approx(1.0).epsilon(1e-12));
  EvolveOptions opt;
  opt.sample_steps = linear_steps(1000, 50);
  const EvolveResult res = evolve(init, GeneratorParams{1.2, 0.4, 0.7}, 50.0, g.dx, opt);
  for (double t : res.series.trace) CHECK(std::abs(t - 1.0) <= 1e-8);
  CHECK(res.snapshots.back().hermiticity_error() <= 1e-10);
}

TEST_CASE("evolve edge cases") {
  const PdeGrid g = PdeGrid::symmetric(2.0, 0.1);
  const PauliField init = pauli_from_spinor(gaussian(g, 0.3, 0.0, kSym), g);
  const EvolveResult zero = evolve(init, GeneratorParams{1.0, 0.5, 0.5}, 0.0, g.dx);
  CHECK(field_diff(zero.snapshots.back(), init) == 0.0);
  CHECK_THROWS_AS(evolve(init, GeneratorParams{}, 1.0, 0.05), ConfigError);
}

TEST_CASE("massless noiseless delta splits into two half-mass fronts") {
  const PdeGrid g = PdeGrid::symmetric(2.0, 0.1);
  std::vector<Vec2> psi(g.n, Vec2::Zero());
  const int c = (g.n - 1) / 2;
  psi[c] = kSym / std::sqrt(g.dx);
  const int k = 7;
  const EvolveResult res = evolve(pauli_from_spinor(psi, g), GeneratorParams{}, k * g.dx, g.dx);
  const DiagonalFields d = extract_diagonal(res.snapshots.back());
  CHECK(d.R[0][c - k] * g.dx == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.R[0][c + k] * g.dx == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.R[3][c - k] * g.dx == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.R[3][c + k] * g.dx == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("Strang composite is second order") {
  auto run = [](double dx) {
    const PdeGrid g = PdeGrid::symmetric(4.0, dx);
    const PauliField init = pauli_from_spinor(gaussian(g, 0.5, 1.0, kSym), g);
    return extract_diagonal(evolve(init, GeneratorParams{0.8, 0.3, 0.5}, 1.0, dx).snapshots.back());
  };
  const DiagonalFields a = run(0.1), b = run(0.05), c = run(0.025);
  double e1 = 0.0, e2 = 0.0;
  for (int i = 0; i < a.grid.n; ++i) {
    e1 = std::max(e1, std::abs(a.R[0][i] - b.R[0][2 * i]));
    e2 = std::max(e2, std::abs(b.R[0][2 * i] - c.R[0][4 * i]));
  }
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("constant kernels reproduce the homogeneous generator") {
  KernelSet k;
  k.gamma = {0.7, 0.3, 0.5};
  const GeneratorParams p{0.4, 0.3, 0.5};
  for (double d : {0.0, 0.3, 2.0}) CHECK(max_abs(kernel_generator(k, 0.4, d) - noise_generator(p)) == 0.0);

  const PdeGrid g = PdeGrid::symmetric(1.0, 0.1);
  const CharacteristicField v = v_transform(pauli_from_spinor(gaussian(g, 0.3, 1.0, kSym), g));
  CHECK(field_diff(kernel_source_step(v, g.dx, k, p), source_step(v, g.dx, p)) == 0.0);

  // kappa(0) = 1 makes the diagonal cells blind to the kernel.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int t = 0; t < 10; ++t) {
    const double len = u(rng);
    KernelSet kk;
    kk.gamma = {u(rng), u(rng), u(rng)};
    kk.kappa = {[len](double d) { return std::exp(-d / len); },
                [len](double d) { return std::exp(-d * d / len); },
                [len](double d) { return 1.0 / (1.0 + d * len); }};
    const Mat4 diag = kernel_generator(kk, 0.6, 0.0);
    CHECK(max_abs(diag - noise_generator(GeneratorParams{0.6, kk.gamma[1], kk.gamma[2]})) < 1e-15);
  }
}

TEST_CASE("uncorrelated identity channel damps off-diagonal cells") {
  // kappa0 = 0 away from the diagonal: r(x, x') decays as e^{-gamma0 t / 2} for x != x'.
  const PdeGrid g = PdeGrid::symmetric(2.0, 0.05);
  const PauliField init = pauli_from_spinor(gaussian(g, 0.3, 0.0, kSym), g);
  KernelSet k;
  k.gamma = {2.0, 0.0, 0.0};
  k.kappa[0] = [](double d) { return d == 0.0 ? 1.0 : 0.0; };
  const double T = 0.5;
  const PauliField a = evolve(init, k, 0.0, T, g.dx).snapshots.back();
  const PauliField b = evolve(init, GeneratorParams{}, T, g.dx).snapshots.back();
  const double factor = std::exp(-k.gamma[0] * T / 2.0);
  double err = 0.0;
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      const double expect = i == j ? 1.0 : factor;
      err = std::max(err, std::abs(a.at(0, i, j) - expect * b.at(0, i, j)));
    }
  }
  CHECK(err < 1e-4);
}

TEST_CASE("diagonal fast path agrees with the full grid") {
  const PdeGrid g = PdeGrid::symmetric(5.0, 0.05);
  const auto psi = gaussian(g, 0.5, 0.0, Vec2(1.0, 0.0));
  const GeneratorParams p{0.0, 0.0, 0.5};
  const EvolveResult full = evolve(pauli_from_spinor(psi, g), p, 2.0, g.dx);
  const DiagonalFields f = extract_diagonal(full.snapshots.back());
  DiagonalFields init = extract_diagonal(pauli_from_spinor(psi, g));
  DiagonalSolver s(g, g.dx, p);
  s.set(init.R[0], init.R[3]);
  s.advance(step_count(2.0, g.dx));
  const DiagonalFields d = s.fields(2.0);
  for (int i = 0; i < g.n; ++i) {
    CHECK(std::abs(d.R[0][i] - f.R[0][i]) < 1e-12);
    CHECK(std::abs(d.R[3][i] - f.R[3][i]) < 1e-12);
  }
  CHECK_THROWS(DiagonalSolver(g, g.dx, GeneratorParams{0.5, 0.0, 0.5}));
}

TEST_CASE("moment solver reproduces full-grid moments") {
  const PdeGrid g = PdeGrid::symmetric(4.0, 0.05);
  const auto psi = gaussian(g, 0.4, 3.0, Vec2(0.6, 0.8));
  const GeneratorParams p{0.7, 0.2, 0.5};
  const double T = 1.5;
  EvolveOptions opt;
  opt.sample_steps = {0, 10, 30};
  const EvolveResult full = evolve(pauli_from_spinor(psi, g), p, T, g.dx, opt);
  MomentSolver ms(g, g.dx, p, g.n);
  ms.set_from_spinor(psi);
  const MomentEvolveResult m = evolve_moments(ms, T, g.dx, {0, 10, 30});
  REQUIRE(m.series.size() == full.series.size());
  for (std::size_t k = 0; k < m.series.size(); ++k) {
    CHECK(m.series.mean_x[k] == doctest::Approx(full.series.mean_x[k]).epsilon(1e-9));
    CHECK(m.series.second_moment[k] == doctest::Approx(full.series.second_moment[k]).epsilon(1e-9));
    CHECK(m.series.trace[k] == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("binary dump round trip") {
  const PdeGrid g = PdeGrid::symmetric(0.5, 0.1);
  const PauliField r = pauli_from_spinor(gaussian(g, 0.2, 1.0, kSym), g);
  const auto path = std::filesystem::temp_directory_path() / "qrw_dump_test.bin";
  write_binary_dump(path.string(), r, 1.25);
  const BinaryDump d = read_binary_dump(path.string());
  std::filesystem::remove(path);
  CHECK(d.n == g.n);
  CHECK(d.dx == g.dx);
  CHECK(d.t == 1.25);
  for (int mu = 0; mu < 4; ++mu) CHECK(d.planes[mu] == r.c[mu]);
}
