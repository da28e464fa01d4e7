#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "qrw/coin.hpp"

namespace qrw {

// Lattice density operator as 2x2 blocks rho(x, x'), row-major in (x, x').
struct DensityGrid {
  LatticeGrid grid;
  std::vector<Mat2> blocks;

  DensityGrid() = default;
  explicit DensityGrid(const LatticeGrid& g)
      : grid(g), blocks(static_cast<std::size_t>(g.n_sites) * g.n_sites, Mat2::Zero()) {}

  static DensityGrid pure(const WaveState& s);

  int n() const { return grid.n_sites; }
  Mat2& at(int x, int xp) { return blocks[static_cast<std::size_t>(x) * grid.n_sites + xp]; }
  const Mat2& at(int x, int xp) const {
    return blocks[static_cast<std::size_t>(x) * grid.n_sites + xp];
  }

  cplx trace() const;
  double purity() const;
  double hermiticity_error() const;
  // Dense 2N x 2N matrix; basis index 2*x + chirality.
  Eigen::MatrixXcd dense() const;
  // Smallest eigenvalue of the dense operator; only for n <= 64.
  double min_eigenvalue() const;
  // Site probabilities tr rho(x, x).
  std::vector<double> diagonal() const;
};

struct ChannelRates {
  double pi1_rate = 0.0;
  double pi2_rate = 0.0;
};

// Generic jump channel: rho -> (1 - eps sum rate) U rho U^dag + sum eps rate J rho J^dag.
struct ChannelJump {
  double rate = 0.0;
  Mat2 op = Mat2::Identity();
};

DensityGrid unitary_conjugate(const DensityGrid& rho, const AngleField& field, double t);
DensityGrid channel_step(const DensityGrid& rho, const AngleField& field, const ChannelRates& rates,
                         double t);
DensityGrid channel_step(const DensityGrid& rho, const AngleField& field,
                         const std::vector<ChannelJump>& jumps, double t);

enum class NoiseDistribution { gaussian, uniform, two_point };

struct NoiseComponent {
  NoiseDistribution kind = NoiseDistribution::gaussian;
  double stddev = 0.0;  // delta tilde, before the sqrt(eps) scaling
};

// Components indexed as CoinAngles: (xi0, xi1, theta, chi).
struct NoiseSpec {
  std::array<NoiseComponent, 4> comp{};
  void validate() const;
};

// Stream for step `step` of trajectory `traj`; depends only on the triple, so any
// subset of trajectories can be replayed independently.
std::mt19937_64 step_rng(std::uint64_t seed, std::uint64_t traj, std::uint64_t step);

CoinAngles sample_unit_offsets(const NoiseSpec& spec, std::mt19937_64& rng);
// omega^l = sqrt(eps) * omega_tilde^l.
CoinAngles sample_coin_offsets(const NoiseSpec& spec, double eps, std::mt19937_64& rng);

WaveState trajectory_step(const WaveState& s, const AngleField& field, const CoinAngles& offsets,
                          double t);

struct EnsembleRun {
  AngleField field;
  NoiseSpec noise;
  int n_steps = 0;
  int n_traj = 1;
  std::uint64_t seed = 0;
};

DensityGrid ensemble_density(const EnsembleRun& run, const WaveState& init);

// Site probabilities averaged over trajectories with their standard errors.
struct DiagonalEstimate {
  std::vector<double> mean;
  std::vector<double> std_error;
};
DiagonalEstimate ensemble_diagonal(const EnsembleRun& run, const WaveState& init);

struct CorrelatedComponent {
  double variance = 0.0;  // gamma_l / 2
  std::function<double(double)> kernel;  // kappa_l(d), d >= 0
};

struct CorrelatedNoiseSpec {
  std::array<CorrelatedComponent, 4> comp{};
  int modes = 8;  // retained Fourier modes per sign
};

using SiteOffsets = std::array<std::vector<double>, 4>;

// Band-limited stationary Gaussian fields with covariance variance * kappa(|x - x'|).
class SmoothFieldSampler {
 public:
  SmoothFieldSampler(const CorrelatedNoiseSpec& spec, const LatticeGrid& grid);
  SiteOffsets sample(double eps, std::mt19937_64& rng) const;

 private:
  LatticeGrid grid_;
  int modes_;
  // amplitude_[l][k] = sqrt(weight_k / n) for retained wavenumbers k = 0..modes.
  std::array<std::vector<double>, 4> amplitude_;
};

SiteOffsets sample_smooth_field(const CorrelatedNoiseSpec& spec, const LatticeGrid& grid,
                                double eps, std::mt19937_64& rng);

WaveState trajectory_step(const WaveState& s, const AngleField& field, const SiteOffsets& offsets,
                          double t);

struct CorrelatedEnsembleRun {
  AngleField field;
  CorrelatedNoiseSpec noise;
  int n_steps = 0;
  int n_traj = 1;
  std::uint64_t seed = 0;
};

DensityGrid correlated_ensemble_density(const CorrelatedEnsembleRun& run, const WaveState& init);

}  // namespace qrw
