#include "qrw/lattice_noise.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

namespace qrw {

DensityGrid DensityGrid::pure(const WaveState& s) {
  DensityGrid rho(s.grid);
  const int n = s.grid.n_sites;
  for (int x = 0; x < n; ++x) {
    for (int xp = 0; xp < n; ++xp) rho.at(x, xp) = s.amp[x] * s.amp[xp].adjoint();
  }
  return rho;
}

cplx DensityGrid::trace() const {
  cplx tr = 0.0;
  for (int x = 0; x < n(); ++x) tr += at(x, x).trace();
  return tr;
}

double DensityGrid::purity() const {
  // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
  double p = 0.0;
  for (const auto& b : blocks) p += b.squaredNorm();
  return p;
}

double DensityGrid::hermiticity_error() const {
  double err = 0.0;
  for (int x = 0; x < n(); ++x) {
    for (int xp = x; xp < n(); ++xp) {
      err = std::max(err, (at(x, xp) - at(xp, x).adjoint()).cwiseAbs().maxCoeff());
    }
  }
  return err;
}

Eigen::MatrixXcd DensityGrid::dense() const {
  const int n2 = 2 * n();
  Eigen::MatrixXcd d(n2, n2);
  for (int x = 0; x < n(); ++x) {
    for (int xp = 0; xp < n(); ++xp) d.block<2, 2>(2 * x, 2 * xp) = at(x, xp);
  }
  return d;
}

double DensityGrid::min_eigenvalue() const {
  if (n() > 64) throw std::invalid_argument("dense positivity check limited to 64 sites");
  Eigen::MatrixXcd d = dense();
  d = 0.5 * (d + d.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

std::vector<double> DensityGrid::diagonal() const {
  std::vector<double> p(n());
  for (int x = 0; x < n(); ++x) p[x] = at(x, x).trace().real();
  return p;
}

namespace {

std::vector<Mat2> coins_at(const LatticeGrid& g, const AngleField& field, double t,
                           const CoinAngles& offsets) {
  if (field.homogeneous()) {
    return {coin_matrix(field.angles(t, 0.0, g.eps) + offsets)};
  }
  std::vector<Mat2> c(g.n_sites);
  for (int i = 0; i < g.n_sites; ++i) {
    c[i] = coin_matrix(field.angles(t, g.position(i), g.eps) + offsets);
  }
  return c;
}

}  // namespace

DensityGrid unitary_conjugate(const DensityGrid& rho, const AngleField& field, double t) {
  const int n = rho.n();
  const auto coins = coins_at(rho.grid, field, t, CoinAngles{});
  const bool uniform = coins.size() == 1;
  DensityGrid out(rho.grid);
  // Chirality L takes from x + 1, R from x - 1.
  for (int x = 0; x < n; ++x) {
    const int xl = (x + 1) % n;
    const int xr = (x + n - 1) % n;
    const Mat2& cx = uniform ? coins[0] : coins[x];
    for (int xp = 0; xp < n; ++xp) {
      const int xpl = (xp + 1) % n;
      const int xpr = (xp + n - 1) % n;
      Mat2 b;
      b(0, 0) = rho.at(xl, xpl)(0, 0);
      b(0, 1) = rho.at(xl, xpr)(0, 1);
      b(1, 0) = rho.at(xr, xpl)(1, 0);
      b(1, 1) = rho.at(xr, xpr)(1, 1);
      const Mat2& cxp = uniform ? coins[0] : coins[xp];
      out.at(x, xp).noalias() = cx * b * cxp.adjoint();
    }
  }
  return out;
}

DensityGrid channel_step(const DensityGrid& rho, const AngleField& field,
                         const std::vector<ChannelJump>& jumps, double t) {
  const double eps = rho.grid.eps;
  double total = 0.0;
  for (const auto& j : jumps) {
    if (!(j.rate >= 0.0)) throw ConfigError("rate must be non-negative");
    total += eps * j.rate;
  }
  if (total >= 1.0) throw ConfigError("channel probabilities sum to >= 1 at this eps");
  DensityGrid out = unitary_conjugate(rho, field, t);
  const double keep = 1.0 - total;
  for (std::size_t k = 0; k < out.blocks.size(); ++k) {
    Mat2 acc = keep * out.blocks[k];
    for (const auto& j : jumps) acc += (eps * j.rate) * (j.op * rho.blocks[k] * j.op.adjoint());
    out.blocks[k] = acc;
  }
  return out;
}

DensityGrid channel_step(const DensityGrid& rho, const AngleField& field, const ChannelRates& rates,
                         double t) {
  const double eps = rho.grid.eps;
  const double p1 = eps * rates.pi1_rate;
  const double p2 = eps * rates.pi2_rate;
  if (!(rates.pi1_rate >= 0.0) || !(rates.pi2_rate >= 0.0)) {
    throw ConfigError("rate must be non-negative");
  }
  if (p1 + p2 >= 1.0) throw ConfigError("channel probabilities sum to >= 1 at this eps");
  DensityGrid out = unitary_conjugate(rho, field, t);
  const double keep = 1.0 - p1 - p2;
  for (std::size_t k = 0; k < out.blocks.size(); ++k) {
    const Mat2& r = rho.blocks[k];
    Mat2& o = out.blocks[k];
    // sigma3 r sigma3 negates off-diagonals; sigma1 r sigma1 swaps both diagonals.
    const cplx o00 = keep * o(0, 0) + p1 * r(0, 0) + p2 * r(1, 1);
    const cplx o11 = keep * o(1, 1) + p1 * r(1, 1) + p2 * r(0, 0);
    const cplx o01 = keep * o(0, 1) - p1 * r(0, 1) + p2 * r(1, 0);
    const cplx o10 = keep * o(1, 0) - p1 * r(1, 0) + p2 * r(0, 1);
    o << o00, o01, o10, o11;
  }
  return out;
}

void NoiseSpec::validate() const {
  for (const auto& c : comp) {
    if (!(c.stddev >= 0.0) || !std::isfinite(c.stddev)) {
      throw ConfigError("noise standard deviation must be non-negative");
    }
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::mt19937_64 step_rng(std::uint64_t seed, std::uint64_t traj, std::uint64_t step) {
  return std::mt19937_64(splitmix64(splitmix64(splitmix64(seed) ^ traj) ^ step));
}

CoinAngles sample_unit_offsets(const NoiseSpec& spec, std::mt19937_64& rng) {
  CoinAngles w;
  for (int l = 0; l < 4; ++l) {
    const NoiseComponent& c = spec.comp[l];
    if (c.stddev == 0.0) continue;
    switch (c.kind) {
      case NoiseDistribution::gaussian:
        w[l] = std::normal_distribution<double>(0.0, c.stddev)(rng);
        break;
      case NoiseDistribution::uniform: {
        const double h = std::sqrt(3.0) * c.stddev;
        w[l] = std::uniform_real_distribution<double>(-h, h)(rng);
        break;
      }
      case NoiseDistribution::two_point:
        w[l] = std::bernoulli_distribution(0.5)(rng) ? c.stddev : -c.stddev;
        break;
    }
  }
  return w;
}

CoinAngles sample_coin_offsets(const NoiseSpec& spec, double eps, std::mt19937_64& rng) {
  return std::sqrt(eps) * sample_unit_offsets(spec, rng);
}

WaveState trajectory_step(const WaveState& s, const AngleField& field, const CoinAngles& offsets,
                          double t) {
  return walk_step_with(s, coins_at(s.grid, field, t, offsets));
}

namespace {

// Runs one noisy trajectory and returns the final state.
WaveState run_trajectory(const EnsembleRun& run, const WaveState& init, std::uint64_t traj) {
  const double eps = init.grid.eps;
  WaveState s = init;
  for (int k = 0; k < run.n_steps; ++k) {
    auto rng = step_rng(run.seed, traj, static_cast<std::uint64_t>(k));
    const CoinAngles w = sample_coin_offsets(run.noise, eps, rng);
    s = trajectory_step(s, run.field, w, k * eps);
  }
  return s;
}

// Trajectories are split into a fixed number of contiguous chunks and the partial
// sums are reduced in chunk order, so results do not depend on the thread count.
constexpr int kChunks = 16;

template <class Fn>
void for_chunks(int n_traj, Fn&& fn) {
  const int workers =
      std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, kChunks);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (int c = next++; c < kChunks; c = next++) {
      const int lo = static_cast<int>(static_cast<long>(n_traj) * c / kChunks);
      const int hi = static_cast<int>(static_cast<long>(n_traj) * (c + 1) / kChunks);
      try {
        fn(c, lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

DensityGrid reduce_density(const std::vector<DensityGrid>& part, int n_traj) {
  DensityGrid acc = part[0];
  for (std::size_t c = 1; c < part.size(); ++c) {
    for (std::size_t b = 0; b < acc.blocks.size(); ++b) acc.blocks[b] += part[c].blocks[b];
  }
  const double w = 1.0 / n_traj;
  for (auto& b : acc.blocks) b *= w;
  return acc;
}

}  // namespace

DensityGrid ensemble_density(const EnsembleRun& run, const WaveState& init) {
  if (run.n_traj < 1) throw ConfigError("n_traj must be at least 1");
  run.noise.validate();
  const int n = init.grid.n_sites;
  std::vector<DensityGrid> part(kChunks, DensityGrid(init.grid));
  for_chunks(run.n_traj, [&](int c, int lo, int hi) {
    DensityGrid& acc = part[c];
    for (int j = lo; j < hi; ++j) {
      const WaveState s = run_trajectory(run, init, static_cast<std::uint64_t>(j));
      for (int x = 0; x < n; ++x) {
        for (int xp = 0; xp < n; ++xp) acc.at(x, xp).noalias() += s.amp[x] * s.amp[xp].adjoint();
      }
    }
  });
  return reduce_density(part, run.n_traj);
}

DiagonalEstimate ensemble_diagonal(const EnsembleRun& run, const WaveState& init) {
  if (run.n_traj < 2) throw ConfigError("standard errors need at least 2 trajectories");
  run.noise.validate();
  const int n = init.grid.n_sites;
  std::vector<std::vector<double>> sum(kChunks, std::vector<double>(n, 0.0)), sum_sq = sum;
  for_chunks(run.n_traj, [&](int c, int lo, int hi) {
    for (int j = lo; j < hi; ++j) {
      const WaveState s = run_trajectory(run, init, static_cast<std::uint64_t>(j));
      for (int x = 0; x < n; ++x) {
        const double p = s.amp[x].squaredNorm();
        sum[c][x] += p;
        sum_sq[c][x] += p * p;
      }
    }
  });
  DiagonalEstimate est;
  est.mean.resize(n);
  est.std_error.resize(n);
  const double m = run.n_traj;
  for (int x = 0; x < n; ++x) {
    double s1 = 0.0, s2 = 0.0;
    for (int c = 0; c < kChunks; ++c) {
      s1 += sum[c][x];
      s2 += sum_sq[c][x];
    }
    const double mean = s1 / m;
    const double var = std::max(0.0, (s2 - m * mean * mean) / (m - 1.0));
    est.mean[x] = mean;
    est.std_error[x] = std::sqrt(var / m);
  }
  return est;
}

SmoothFieldSampler::SmoothFieldSampler(const CorrelatedNoiseSpec& spec, const LatticeGrid& grid)
    : grid_(grid), modes_(spec.modes) {
  if (spec.modes < 1) throw ConfigError("smoothness must retain at least one mode");
  const int n = grid.n_sites;
  modes_ = std::min(spec.modes, n / 2);
  for (int l = 0; l < 4; ++l) {
    const CorrelatedComponent& c = spec.comp[l];
    amplitude_[l].assign(modes_ + 1, 0.0);
    if (c.variance < 0.0) throw ConfigError("rate must be non-negative");
    if (c.variance == 0.0) continue;
    if (!c.kernel) throw ConfigError("kernel missing for a noisy component");
    std::vector<double> cov(n);
    for (int j = 0; j < n; ++j) cov[j] = c.kernel(std::min(j, n - j) * grid.eps);
    if (std::abs(cov[0] - 1.0) > 1e-12) throw ConfigError("kernel must satisfy kappa(0) = 1");
    for (int k = 0; k <= modes_; ++k) {
      double w = 0.0;
      for (int j = 0; j < n; ++j) {
        w += cov[j] * std::cos(2.0 * std::numbers::pi * j * k / n);
      }
      // Normalized weight; the discrete spectrum sums to n.
      const double rel = w / n;
      if (rel < -1e-10) throw ConfigError("kernel is not positive semidefinite on the grid");
      // Roundoff-level weights would otherwise survive the square root as ~1e-9 modes.
      amplitude_[l][k] = rel > 1e-12 ? std::sqrt(c.variance * rel) : 0.0;
    }
  }
}

SiteOffsets SmoothFieldSampler::sample(double eps, std::mt19937_64& rng) const {
  const int n = grid_.n_sites;
  const double scale = std::sqrt(eps);
  std::normal_distribution<double> normal;
  SiteOffsets out;
  for (int l = 0; l < 4; ++l) {
    out[l].assign(n, 0.0);
    const auto& amp = amplitude_[l];
    for (int k = 0; k <= modes_; ++k) {
      if (amp[k] == 0.0) continue;
      // Modes k and n - k coincide at k = 0 and at the Nyquist index.
      const bool self_paired = k == 0 || 2 * k == n;
      const double a = self_paired ? amp[k] : std::sqrt(2.0) * amp[k];
      const double u = normal(rng);
      const double v = self_paired ? 0.0 : normal(rng);
      for (int j = 0; j < n; ++j) {
        const double ph = 2.0 * std::numbers::pi * j * k / n;
        out[l][j] += scale * a * (u * std::cos(ph) + v * std::sin(ph));
      }
    }
  }
  return out;
}

SiteOffsets sample_smooth_field(const CorrelatedNoiseSpec& spec, const LatticeGrid& grid,
                                double eps, std::mt19937_64& rng) {
  return SmoothFieldSampler(spec, grid).sample(eps, rng);
}

WaveState trajectory_step(const WaveState& s, const AngleField& field, const SiteOffsets& offsets,
                          double t) {
  const int n = s.grid.n_sites;
  std::vector<Mat2> coins(n);
  for (int i = 0; i < n; ++i) {
    CoinAngles a = field.angles(t, s.grid.position(i), s.grid.eps);
    for (int l = 0; l < 4; ++l) a[l] += offsets[l].empty() ? 0.0 : offsets[l][i];
    coins[i] = coin_matrix(a);
  }
  return walk_step_with(s, coins);
}

DensityGrid correlated_ensemble_density(const CorrelatedEnsembleRun& run, const WaveState& init) {
  if (run.n_traj < 1) throw ConfigError("n_traj must be at least 1");
  const SmoothFieldSampler sampler(run.noise, init.grid);
  const int n = init.grid.n_sites;
  const double eps = init.grid.eps;
  std::vector<DensityGrid> part(kChunks, DensityGrid(init.grid));
  for_chunks(run.n_traj, [&](int c, int lo, int hi) {
    DensityGrid& acc = part[c];
    for (int j = lo; j < hi; ++j) {
      WaveState s = init;
      for (int k = 0; k < run.n_steps; ++k) {
        auto rng = step_rng(run.seed, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k));
        s = trajectory_step(s, run.field, sampler.sample(eps, rng), k * eps);
      }
      for (int x = 0; x < n; ++x) {
        for (int xp = 0; xp < n; ++xp) acc.at(x, xp).noalias() += s.amp[x] * s.amp[xp].adjoint();
      }
    }
  });
  return reduce_density(part, run.n_traj);
}

}  // namespace qrw
