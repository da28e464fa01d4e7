#include "qrw/lindblad.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "qrw/observables.hpp"

namespace qrw {

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

// Sign of sigma_l^mu under rho -> L_l rho L_l for L = I, sigma3, sigma1.
constexpr int kFlip[3][4] = {{1, 1, 1, 1}, {1, -1, -1, 1}, {1, 1, -1, -1}};

inline void matvec4(const Mat4& M, cplx* a, cplx* b, cplx* c, cplx* d) {
  const cplx x0 = *a, x1 = *b, x2 = *c, x3 = *d;
  *a = M(0, 0) * x0 + M(0, 1) * x1 + M(0, 2) * x2 + M(0, 3) * x3;
  *b = M(1, 0) * x0 + M(1, 1) * x1 + M(1, 2) * x2 + M(1, 3) * x3;
  *c = M(2, 0) * x0 + M(2, 1) * x1 + M(2, 2) * x2 + M(2, 3) * x3;
  *d = M(3, 0) * x0 + M(3, 1) * x1 + M(3, 2) * x2 + M(3, 3) * x3;
}

std::vector<Mat4> kernel_half_table(const KernelSet& k, double mass, int count, double dx,
                                    double dt, double alpha) {
  std::vector<Mat4> t(count);
  for (int d = 0; d < count; ++d) {
    t[d] = source_propagator(characteristic_source(kernel_generator(k, mass, d * dx)), 0.5 * dt,
                             alpha);
  }
  return t;
}

std::vector<Mat4> squared(const std::vector<Mat4>& h) {
  std::vector<Mat4> f(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) f[i] = h[i] * h[i];
  return f;
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
}

}  // namespace

void GeneratorParams::validate() const {
  if (!std::isfinite(mass)) throw ConfigError("mass must be finite");
  if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0)) throw ConfigError("rate must be non-negative");
}

void KernelSet::validate() const {
  for (int l = 0; l < 3; ++l) {
    if (!(gamma[l] >= 0.0)) throw ConfigError("rate must be non-negative");
    if (std::abs(kernel(l, 0.0) - 1.0) > 1e-12) throw ConfigError("kernel must satisfy kappa(0) = 1");
  }
}

const Mat4& unitary_U() {
  static const Mat4 U = [] {
    Mat4 u;
    u << 1, 0, 0, 1,
        0, kI, 1, 0,
        0, -kI, 1, 0,
        -1, 0, 0, 1;
    return Mat4(kInvSqrt2 * u);
  }();
  return U;
}

Mat4 jacobian_A() {
  Mat4 a = Mat4::Zero();
  a(0, 3) = -1.0;
  a(3, 0) = -1.0;
  a(1, 2) = kI;
  a(2, 1) = -kI;
  return a;
}

Mat4 jacobian_Aprime() { return jacobian_A().transpose(); }

Mat4 noise_generator(const GeneratorParams& p) {
  Mat4 f = Mat4::Zero();
  f(1, 1) = -p.gamma1;
  f(2, 2) = -(p.gamma1 + p.gamma2);
  f(2, 3) = -2.0 * p.mass;
  f(3, 2) = 2.0 * p.mass;
  f(3, 3) = -p.gamma2;
  return f;
}

Mat4 kernel_generator(const KernelSet& k, double mass, double d) {
  Mat4 f = Mat4::Zero();
  for (int mu = 0; mu < 4; ++mu) {
    double rate = 0.0;
    for (int l = 0; l < 3; ++l) rate += 0.5 * k.gamma[l] * (k.kernel(l, d) * kFlip[l][mu] - 1.0);
    f(mu, mu) = rate;
  }
  f(2, 3) = -2.0 * mass;
  f(3, 2) = 2.0 * mass;
  return f;
}

Mat4 characteristic_source(const Mat4& F) {
  return unitary_U() * F * unitary_U().adjoint();
}

Mat4 source_propagator(const Mat4& S, double dt, double alpha) {
  check_alpha(alpha);
  const Mat4 lhs = Mat4::Identity() - ((1.0 - alpha) * dt) * S;
  const Mat4 rhs = Mat4::Identity() + (alpha * dt) * S;
  Eigen::FullPivLU<Mat4> lu(lhs);
  if (!lu.isInvertible() || lu.rcond() < 1e-12) {
    throw NumericError("source step matrix is singular; reduce dt");
  }
  return lu.solve(rhs);
}

PauliField pauli_from_density(const DensityGrid& rho) {
  const LatticeGrid& lg = rho.grid;
  PauliField r(PdeGrid(lg.n_sites, lg.eps, lg.origin));
  const double inv_a = 1.0 / lg.eps;
  for (int i = 0; i < lg.n_sites; ++i) {
    for (int j = 0; j < lg.n_sites; ++j) {
      const Mat2& b = rho.at(i, j);
      r.at(0, i, j) = inv_a * (b(0, 0) + b(1, 1));
      r.at(1, i, j) = inv_a * (b(0, 1) + b(1, 0));
      r.at(2, i, j) = inv_a * kI * (b(0, 1) - b(1, 0));
      r.at(3, i, j) = inv_a * (b(0, 0) - b(1, 1));
    }
  }
  return r;
}

DensityGrid density_from_pauli(const PauliField& r) {
  const PdeGrid& g = r.grid;
  DensityGrid rho(LatticeGrid(g.n, g.dx, g.x_min));
  const double h = 0.5 * g.dx;
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      const cplx r0 = r.at(0, i, j), r1 = r.at(1, i, j), r2 = r.at(2, i, j), r3 = r.at(3, i, j);
      Mat2& b = rho.at(i, j);
      b << h * (r0 + r3), h * (r1 - kI * r2), h * (r1 + kI * r2), h * (r0 - r3);
    }
  }
  return rho;
}

PauliField pauli_from_spinor(const std::vector<Vec2>& psi, const PdeGrid& grid) {
  if (psi.size() != static_cast<std::size_t>(grid.n)) {
    throw std::invalid_argument("spinor length does not match grid");
  }
  PauliField r(grid);
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      const cplx ll = psi[i](0) * std::conj(psi[j](0));
      const cplx lr = psi[i](0) * std::conj(psi[j](1));
      const cplx rl = psi[i](1) * std::conj(psi[j](0));
      const cplx rr = psi[i](1) * std::conj(psi[j](1));
      r.at(0, i, j) = ll + rr;
      r.at(1, i, j) = lr + rl;
      r.at(2, i, j) = kI * (lr - rl);
      r.at(3, i, j) = ll - rr;
    }
  }
  return r;
}

CharacteristicField v_transform(const PauliField& r) {
  CharacteristicField v(r.grid);
  const Mat4& U = unitary_U();
  for (std::size_t k = 0; k < r.grid.cells(); ++k) {
    cplx a = r.c[0][k], b = r.c[1][k], c = r.c[2][k], d = r.c[3][k];
    matvec4(U, &a, &b, &c, &d);
    v.c[0][k] = a;
    v.c[1][k] = b;
    v.c[2][k] = c;
    v.c[3][k] = d;
  }
  return v;
}

PauliField v_inverse(const CharacteristicField& v) {
  PauliField r(v.grid);
  const Mat4 Ud = unitary_U().adjoint();
  for (std::size_t k = 0; k < v.grid.cells(); ++k) {
    cplx a = v.c[0][k], b = v.c[1][k], c = v.c[2][k], d = v.c[3][k];
    matvec4(Ud, &a, &b, &c, &d);
    r.c[0][k] = a;
    r.c[1][k] = b;
    r.c[2][k] = c;
    r.c[3][k] = d;
  }
  return r;
}

std::array<int, 2> characteristic_speeds(int mu) {
  static constexpr int lam[4] = {-1, -1, 1, 1};
  static constexpr int lamp[4] = {-1, 1, -1, 1};
  return {lam[mu], lamp[mu]};
}

void require_exact_advection(const PdeGrid& g, double dt) {
  if (!(std::abs(dt - g.dx) <= 1e-12 * g.dx)) {
    throw ConfigError("dt must equal dx for exact advection");
  }
}

void apply_shift(CharacteristicField& v) {
  const int n = v.grid.n;
  for (int mu = 0; mu < 4; ++mu) {
    const auto [lam, lamp] = characteristic_speeds(mu);
    // new(i, j) = old(i - lam, j - lamp)
    const int di = ((-lam) % n + n) % n;
    const int dj = ((-lamp) % n + n) % n;
    auto& p = v.c[mu];
    std::rotate(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(di) * n, p.end());
    for (int i = 0; i < n; ++i) {
      auto row = p.begin() + static_cast<std::ptrdiff_t>(i) * n;
      std::rotate(row, row + dj, row + n);
    }
  }
}

void apply_source(CharacteristicField& v, const Mat4& M) {
  cplx* a = v.c[0].data();
  cplx* b = v.c[1].data();
  cplx* c = v.c[2].data();
  cplx* d = v.c[3].data();
  const std::size_t cells = v.grid.cells();
  for (std::size_t k = 0; k < cells; ++k) matvec4(M, a + k, b + k, c + k, d + k);
}

void apply_source(CharacteristicField& v, const std::vector<Mat4>& by_distance) {
  const int n = v.grid.n;
  if (by_distance.size() < static_cast<std::size_t>(n / 2 + 1)) {
    throw std::invalid_argument("distance table too short for grid");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int s = std::abs(i - j);
      const std::size_t k = v.idx(i, j);
      matvec4(by_distance[std::min(s, n - s)], &v.c[0][k], &v.c[1][k], &v.c[2][k], &v.c[3][k]);
    }
  }
}

CharacteristicField homogeneous_step(CharacteristicField v, double dt) {
  require_exact_advection(v.grid, dt);
  apply_shift(v);
  return v;
}

CharacteristicField source_step(CharacteristicField v, double dt, const GeneratorParams& p,
                                double alpha) {
  p.validate();
  apply_source(v, source_propagator(characteristic_source(noise_generator(p)), dt, alpha));
  return v;
}

CharacteristicField strang_step(CharacteristicField v, double dt, const GeneratorParams& p,
                                double alpha) {
  require_exact_advection(v.grid, dt);
  StrangSolver(v.grid, dt, p, alpha).advance(v, 1);
  return v;
}

CharacteristicField kernel_source_step(CharacteristicField v, double dt, const KernelSet& k,
                                       const GeneratorParams& p, double alpha) {
  k.validate();
  const int n = v.grid.n;
  std::vector<Mat4> table(n / 2 + 1);
  for (int d = 0; d <= n / 2; ++d) {
    table[d] = source_propagator(characteristic_source(kernel_generator(k, p.mass, d * v.grid.dx)),
                                 dt, alpha);
  }
  apply_source(v, table);
  return v;
}

StrangSolver::StrangSolver(const PdeGrid& g, double dt, const GeneratorParams& p, double alpha) {
  require_exact_advection(g, dt);
  p.validate();
  half_ = {source_propagator(characteristic_source(noise_generator(p)), 0.5 * dt, alpha)};
  full_ = squared(half_);
}

StrangSolver::StrangSolver(const PdeGrid& g, double dt, const KernelSet& k, double mass,
                           double alpha) {
  require_exact_advection(g, dt);
  k.validate();
  half_ = kernel_half_table(k, mass, g.n / 2 + 1, g.dx, dt, alpha);
  full_ = squared(half_);
}

void StrangSolver::apply(CharacteristicField& v, const std::vector<Mat4>& m) const {
  if (m.size() == 1) {
    apply_source(v, m.front());
  } else {
    apply_source(v, m);
  }
}

void StrangSolver::advance(CharacteristicField& v, int steps) const {
  if (steps <= 0) return;
  apply(v, half_);
  for (int s = 0; s < steps; ++s) {
    apply_shift(v);
    apply(v, s + 1 < steps ? full_ : half_);
  }
}

int step_count(double t_final, double dt) {
  if (!(t_final >= 0.0)) throw ConfigError("t_final must be non-negative");
  const double q = t_final / dt;
  const long steps = std::lround(q);
  if (std::abs(q - static_cast<double>(steps)) > 1e-6) {
    throw ConfigError("t_final must be a multiple of dt");
  }
  return static_cast<int>(steps);
}

namespace {

DiagonalFields diagonal_of(const CharacteristicField& v, double t) {
  const int n = v.grid.n;
  DiagonalFields d;
  d.grid = v.grid;
  d.t = t;
  for (auto& R : d.R) R.assign(n, 0.0);
  const Mat4 Ud = unitary_U().adjoint();
  for (int i = 0; i < n; ++i) {
    const std::size_t k = v.idx(i, i);
    cplx a = v.c[0][k], b = v.c[1][k], c = v.c[2][k], e = v.c[3][k];
    matvec4(Ud, &a, &b, &c, &e);
    const cplx r[4] = {a, b, c, e};
    for (int mu = 0; mu < 4; ++mu) {
      d.R[mu][i] = r[mu].real();
      d.max_imag = std::max(d.max_imag, std::abs(r[mu].imag()));
    }
  }
  return d;
}

double diag_trace(const DiagonalFields& d) {
  double s = 0.0;
  for (double x : d.R[0]) s += x;
  return s * d.grid.dx;
}

void record(MomentSeries& series, const DiagonalFields& d, const DiagonalFields* prev, double dt) {
  double mean = 0.0, second = 0.0;
  for (int i = 0; i < d.grid.n; ++i) {
    const double x = d.grid.x(i);
    mean += x * d.R[0][i];
    second += x * x * d.R[0][i];
  }
  mean *= d.grid.dx;
  second *= d.grid.dx;
  const double res = prev ? continuity_residual(*prev, d, dt) : kMissing;
  series.push(d.t, mean, second, diag_trace(d), res);
}

std::set<int> normalized_steps(const std::vector<int>& steps, int n_steps, bool all_if_empty) {
  std::set<int> out;
  if (steps.empty()) {
    if (all_if_empty) {
      for (int k = 0; k <= n_steps; ++k) out.insert(k);
    } else {
      out = {0, n_steps};
    }
    return out;
  }
  for (int k : steps) {
    if (k < 0 || k > n_steps) throw ConfigError("schedule step outside the run");
    out.insert(k);
  }
  return out;
}

template <class Advance>
EvolveResult evolve_impl(const PauliField& init, double t_final, double dt,
                         const EvolveOptions& opt, Advance&& advance) {
  require_exact_advection(init.grid, dt);
  const int n_steps = step_count(t_final, dt);
  const std::set<int> samples = normalized_steps(opt.sample_steps, n_steps, true);
  const std::set<int> snaps = normalized_steps(opt.snapshot_steps, n_steps, false);
  std::set<int> events = snaps;
  for (int k : samples) {
    events.insert(k);
    if (k > 0) events.insert(k - 1);
  }

  EvolveResult res;
  CharacteristicField v = v_transform(init);
  int at = 0;
  DiagonalFields prev;
  bool have_prev = false;
  for (int k : events) {
    advance(v, k - at);
    at = k;
    const double t = k * dt;
    const double peak = v.max_abs();
    if (!(peak <= opt.blowup_limit)) {
      std::ostringstream msg;
      msg << "blow-up at step " << k << " (t=" << t << "): max |v| = " << peak;
      throw NumericError(msg.str());
    }
    DiagonalFields d = diagonal_of(v, t);
    if (samples.count(k)) {
      const bool consecutive = have_prev && std::abs(prev.t - (t - dt)) < 0.5 * dt;
      record(res.series, d, consecutive ? &prev : nullptr, dt);
    }
    if (snaps.count(k)) {
      res.snapshots.push_back(k == 0 ? init : v_inverse(v));
      res.snapshot_times.push_back(t);
    }
    prev = std::move(d);
    have_prev = true;
  }
  return res;
}

}  // namespace

EvolveResult evolve(const PauliField& init, const GeneratorParams& p, double t_final, double dt,
                    const EvolveOptions& opt) {
  const StrangSolver solver(init.grid, dt, p, opt.alpha);
  return evolve_impl(init, t_final, dt, opt,
                     [&](CharacteristicField& v, int steps) { solver.advance(v, steps); });
}

EvolveResult evolve(const PauliField& init, const KernelSet& k, double mass, double t_final,
                    double dt, const EvolveOptions& opt) {
  const StrangSolver solver(init.grid, dt, k, mass, opt.alpha);
  return evolve_impl(init, t_final, dt, opt,
                     [&](CharacteristicField& v, int steps) { solver.advance(v, steps); });
}

DiagonalSolver::DiagonalSolver(const PdeGrid& g, double dt, const GeneratorParams& p,
                               double alpha)
    : grid_(g) {
  require_exact_advection(g, dt);
  p.validate();
  if (p.mass != 0.0) throw ConfigError("diagonal fast path requires m = 0");
  const Mat4 h = source_propagator(characteristic_source(noise_generator(p)), 0.5 * dt, alpha);
  half_ = {h(0, 0), h(0, 3), h(3, 0), h(3, 3)};
  v0_.assign(g.n, cplx(0.0));
  v3_.assign(g.n, cplx(0.0));
}

void DiagonalSolver::set(const std::vector<double>& R0, const std::vector<double>& R3) {
  if (R0.size() != static_cast<std::size_t>(grid_.n) || R3.size() != R0.size()) {
    throw std::invalid_argument("diagonal data does not match grid");
  }
  for (int i = 0; i < grid_.n; ++i) {
    v0_[i] = kInvSqrt2 * (R0[i] + R3[i]);
    v3_[i] = kInvSqrt2 * (R3[i] - R0[i]);
  }
}

void DiagonalSolver::apply_half() {
  for (int i = 0; i < grid_.n; ++i) {
    const cplx a = v0_[i], b = v3_[i];
    v0_[i] = half_[0] * a + half_[1] * b;
    v3_[i] = half_[2] * a + half_[3] * b;
  }
}

void DiagonalSolver::advance(int steps) {
  for (int s = 0; s < steps; ++s) {
    apply_half();
    std::rotate(v0_.begin(), v0_.begin() + 1, v0_.end());
    std::rotate(v3_.begin(), v3_.end() - 1, v3_.end());
    apply_half();
  }
}

DiagonalFields DiagonalSolver::fields(double t) const {
  DiagonalFields d;
  d.grid = grid_;
  d.t = t;
  for (auto& R : d.R) R.assign(grid_.n, 0.0);
  for (int i = 0; i < grid_.n; ++i) {
    const cplx r0 = kInvSqrt2 * (v0_[i] - v3_[i]);
    const cplx r3 = kInvSqrt2 * (v0_[i] + v3_[i]);
    d.R[0][i] = r0.real();
    d.R[3][i] = r3.real();
    d.max_imag = std::max({d.max_imag, std::abs(r0.imag()), std::abs(r3.imag())});
  }
  return d;
}

DiagonalEvolveResult evolve_diagonal(const DiagonalFields& init, const GeneratorParams& p,
                                     double t_final, double dt, const EvolveOptions& opt) {
  DiagonalSolver solver(init.grid, dt, p, opt.alpha);
  solver.set(init.R[0], init.R[3]);
  const int n_steps = step_count(t_final, dt);
  const std::set<int> samples = normalized_steps(opt.sample_steps, n_steps, true);
  const std::set<int> snaps = normalized_steps(opt.snapshot_steps, n_steps, false);
  std::set<int> events = snaps;
  for (int k : samples) {
    events.insert(k);
    if (k > 0) events.insert(k - 1);
  }
  DiagonalEvolveResult res;
  int at = 0;
  DiagonalFields prev;
  bool have_prev = false;
  for (int k : events) {
    solver.advance(k - at);
    at = k;
    const double t = k * dt;
    DiagonalFields d = solver.fields(t);
    for (double x : d.R[0]) {
      if (!(std::abs(x) <= opt.blowup_limit)) {
        throw NumericError("blow-up in diagonal run at step " + std::to_string(k));
      }
    }
    if (samples.count(k)) {
      const bool consecutive = have_prev && std::abs(prev.t - (t - dt)) < 0.5 * dt;
      record(res.series, d, consecutive ? &prev : nullptr, dt);
    }
    if (snaps.count(k)) res.snapshots.push_back(d);
    prev = std::move(d);
    have_prev = true;
  }
  return res;
}

MomentSolver::MomentSolver(const PdeGrid& g, double dt, const GeneratorParams& p,
                           int max_separation, double alpha)
    : grid_(g), smax_(max_separation) {
  require_exact_advection(g, dt);
  p.validate();
  if (max_separation < 2) throw ConfigError("max separation must be at least 2");
  half_ = {source_propagator(characteristic_source(noise_generator(p)), 0.5 * dt, alpha)};
  for (auto& byk : m_) {
    for (auto& a : byk) a.assign(2 * smax_ + 1, cplx(0.0));
  }
}

MomentSolver::MomentSolver(const PdeGrid& g, double dt, const KernelSet& k, double mass,
                           int max_separation, double alpha)
    : grid_(g), smax_(max_separation) {
  require_exact_advection(g, dt);
  k.validate();
  if (max_separation < 2) throw ConfigError("max separation must be at least 2");
  half_ = kernel_half_table(k, mass, smax_ + 1, g.dx, dt, alpha);
  for (auto& byk : m_) {
    for (auto& a : byk) a.assign(2 * smax_ + 1, cplx(0.0));
  }
}

const Mat4& MomentSolver::mat(const std::vector<Mat4>& mats, int s) const {
  return mats.size() == 1 ? mats.front() : mats[std::abs(s)];
}

void MomentSolver::set_from_pauli(const PauliField& r) {
  if (r.grid.n != grid_.n || r.grid.dx != grid_.dx || r.grid.x_min != grid_.x_min) {
    throw std::invalid_argument("field grid does not match solver grid");
  }
  for (auto& byk : m_) {
    for (auto& a : byk) std::fill(a.begin(), a.end(), cplx(0.0));
  }
  const Mat4& U = unitary_U();
  const double dx = grid_.dx;
  for (int i = 0; i < grid_.n; ++i) {
    for (int j = 0; j < grid_.n; ++j) {
      const int s = i - j;
      if (std::abs(s) > smax_) throw ConfigError("initial coherence exceeds max separation");
      cplx a = r.at(0, i, j), b = r.at(1, i, j), c = r.at(2, i, j), d = r.at(3, i, j);
      matvec4(U, &a, &b, &c, &d);
      const cplx v[4] = {a, b, c, d};
      const double cm = 0.5 * (grid_.x(i) + grid_.x(j));
      double w = dx;
      for (int k = 0; k < 3; ++k) {
        for (int mu = 0; mu < 4; ++mu) m_[k][mu][s + smax_] += w * v[mu];
        w *= cm;
      }
    }
  }
}

void MomentSolver::set_from_spinor(const std::vector<Vec2>& psi) {
  if (psi.size() != static_cast<std::size_t>(grid_.n)) {
    throw std::invalid_argument("spinor length does not match grid");
  }
  for (auto& byk : m_) {
    for (auto& a : byk) std::fill(a.begin(), a.end(), cplx(0.0));
  }
  double peak = 0.0;
  for (const auto& p : psi) peak = std::max(peak, p.squaredNorm());
  int lo = grid_.n, hi = -1;
  for (int i = 0; i < grid_.n; ++i) {
    if (psi[i].squaredNorm() > 1e-28 * peak) {
      lo = std::min(lo, i);
      hi = std::max(hi, i);
    }
  }
  if (hi < lo) return;
  if (hi - lo > smax_) throw ConfigError("initial coherence exceeds max separation");
  const Mat4& U = unitary_U();
  const double dx = grid_.dx;
  for (int i = lo; i <= hi; ++i) {
    for (int j = lo; j <= hi; ++j) {
      const cplx ll = psi[i](0) * std::conj(psi[j](0));
      const cplx lr = psi[i](0) * std::conj(psi[j](1));
      const cplx rl = psi[i](1) * std::conj(psi[j](0));
      const cplx rr = psi[i](1) * std::conj(psi[j](1));
      cplx a = ll + rr, b = lr + rl, c = kI * (lr - rl), d = ll - rr;
      matvec4(U, &a, &b, &c, &d);
      const cplx v[4] = {a, b, c, d};
      const int s = i - j + smax_;
      const double cm = 0.5 * (grid_.x(i) + grid_.x(j));
      double w = dx;
      for (int k = 0; k < 3; ++k) {
        for (int mu = 0; mu < 4; ++mu) m_[k][mu][s] += w * v[mu];
        w *= cm;
      }
    }
  }
}

void MomentSolver::apply_source(const std::vector<Mat4>& mats) {
  for (int s = -smax_; s <= smax_; ++s) {
    const Mat4& M = mat(mats, s);
    const int idx = s + smax_;
    for (int k = 0; k < 3; ++k) {
      matvec4(M, &m_[k][0][idx], &m_[k][1][idx], &m_[k][2][idx], &m_[k][3][idx]);
    }
  }
}

void MomentSolver::shift() {
  const double dx = grid_.dx;
  // v0 moves to c - dx, v3 to c + dx; moments transform binomially.
  for (int mu : {0, 3}) {
    const double h = mu == 0 ? -dx : dx;
    auto& m0 = m_[0][mu];
    auto& m1 = m_[1][mu];
    auto& m2 = m_[2][mu];
    for (std::size_t s = 0; s < m0.size(); ++s) {
      m2[s] += 2.0 * h * m1[s] + h * h * m0[s];
      m1[s] += h * m0[s];
    }
  }
  // v1: new(s) = old(s + 2); v2: new(s) = old(s - 2).
  for (int k = 0; k < 3; ++k) {
    auto& a = m_[k][1];
    std::rotate(a.begin(), a.begin() + 2, a.end());
    a[a.size() - 1] = a[a.size() - 2] = 0.0;
    auto& b = m_[k][2];
    std::rotate(b.begin(), b.end() - 2, b.end());
    b[0] = b[1] = 0.0;
  }
}

void MomentSolver::advance(int steps) {
  if (steps <= 0) return;
  std::vector<Mat4> full = squared(half_);
  apply_source(half_);
  for (int s = 0; s < steps; ++s) {
    shift();
    apply_source(s + 1 < steps ? full : half_);
  }
}

cplx MomentSolver::r_at_zero(int k, int mu) const {
  const Mat4 Ud = unitary_U().adjoint();
  cplx r = 0.0;
  for (int nu = 0; nu < 4; ++nu) r += Ud(mu, nu) * m_[k][nu][smax_];
  return r;
}

double MomentSolver::trace() const { return r_at_zero(0, 0).real(); }
double MomentSolver::mean() const { return r_at_zero(1, 0).real(); }
double MomentSolver::second_moment() const { return r_at_zero(2, 0).real(); }

double MomentSolver::edge_weight() const {
  double w = 0.0;
  const int last = 2 * smax_;
  for (int idx : {0, 1, last - 1, last}) {
    double sum = 0.0;
    for (int mu = 0; mu < 4; ++mu) sum += std::abs(m_[0][mu][idx]);
    w = std::max(w, sum);
  }
  return w;
}

MomentEvolveResult evolve_moments(MomentSolver& solver, double t_final, double dt,
                                  const std::vector<int>& sample_steps) {
  const int n_steps = step_count(t_final, dt);
  const std::set<int> samples = normalized_steps(sample_steps, n_steps, true);
  MomentEvolveResult res;
  int at = 0;
  for (int k : samples) {
    solver.advance(k - at);
    at = k;
    const double tr = solver.trace();
    if (!std::isfinite(tr) || std::abs(tr) > 1e6) {
      throw NumericError("blow-up in moment run at step " + std::to_string(k));
    }
    res.series.push(k * dt, solver.mean(), solver.second_moment(), tr, kMissing);
    res.max_edge_weight = std::max(res.max_edge_weight, solver.edge_weight());
  }
  return res;
}

namespace {

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(path, mode);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void write_pauli_csv(const std::string& path, const PauliField& r) {
  auto f = open_out(path);
  f << "x,xp,re_r0,im_r0,re_r1,im_r1,re_r2,im_r2,re_r3,im_r3\n";
  for (int i = 0; i < r.grid.n; ++i) {
    for (int j = 0; j < r.grid.n; ++j) {
      f << num(r.grid.x(i)) << ',' << num(r.grid.x(j));
      for (int mu = 0; mu < 4; ++mu) {
        f << ',' << num(r.at(mu, i, j).real()) << ',' << num(r.at(mu, i, j).imag());
      }
      f << '\n';
    }
  }
}

void write_diagonal_csv(const std::string& path, const DiagonalFields& d) {
  auto f = open_out(path);
  f << "x,R0,R1,R2,R3\n";
  for (int i = 0; i < d.grid.n; ++i) {
    f << num(d.grid.x(i));
    for (int mu = 0; mu < 4; ++mu) f << ',' << num(d.R[mu][i]);
    f << '\n';
  }
}

void write_binary_dump(const std::string& path, const PauliField& r, double t) {
  static_assert(std::endian::native == std::endian::little, "dump format assumes little-endian");
  auto f = open_out(path, std::ios::out | std::ios::binary);
  const std::uint64_t n = static_cast<std::uint64_t>(r.grid.n);
  f.write("DLQW", 4);
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  f.write(reinterpret_cast<const char*>(&r.grid.dx), sizeof(double));
  f.write(reinterpret_cast<const char*>(&t), sizeof t);
  for (const auto& p : r.c) {
    f.write(reinterpret_cast<const char*>(p.data()),
            static_cast<std::streamsize>(p.size() * sizeof(cplx)));
  }
  if (!f) throw std::runtime_error("write failed for " + path);
}

BinaryDump read_binary_dump(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::string(magic, 4) != "DLQW") throw std::runtime_error("bad dump magic in " + path);
  std::uint64_t n = 0;
  BinaryDump d;
  f.read(reinterpret_cast<char*>(&n), sizeof n);
  f.read(reinterpret_cast<char*>(&d.dx), sizeof(double));
  f.read(reinterpret_cast<char*>(&d.t), sizeof(double));
  if (!f || n == 0 || n > (1u << 20)) throw std::runtime_error("bad dump header in " + path);
  d.n = static_cast<int>(n);
  for (auto& p : d.planes) {
    p.resize(n * n);
    f.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(cplx)));
  }
  if (!f) throw std::runtime_error("truncated dump " + path);
  return d;
}

}  // namespace qrw
