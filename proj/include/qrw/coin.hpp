#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "qrw/types.hpp"

namespace qrw {

// Coin angles indexed l = 0..3 as (xi0, xi1, theta, chi).
struct CoinAngles {
  double xi0 = 0.0;
  double xi1 = 0.0;
  double theta = 0.0;
  double chi = 0.0;

  double operator[](int l) const;
  double& operator[](int l);
};

CoinAngles operator+(const CoinAngles& a, const CoinAngles& b);
CoinAngles operator*(double s, const CoinAngles& a);

// Euler form: psi = xi1 - chi, phi = xi1 + chi, Theta = 2 theta.
struct EulerAngles {
  double psi = 0.0;
  double phi = 0.0;
  double Theta = 0.0;
};

// e^{i xi0} [[e^{i xi1} cos t, i e^{i chi} sin t], [i e^{-i chi} sin t, e^{-i xi1} cos t]].
Mat2 coin_matrix(const CoinAngles& a);
EulerAngles euler_angles(const CoinAngles& a);
CoinAngles from_euler(const EulerAngles& e, double xi0 = 0.0);

enum class AngleScaling { ballistic, unscaled };

// Angle rates as functions of (t, x). Under ballistic scaling the lattice angle
// is eps * rate; unscaled fields are used as-is (constant-theta spread runs).
class AngleField {
 public:
  using Profile = std::function<double(double t, double x)>;

  AngleField() : constant_(CoinAngles{}) {}
  AngleField(std::array<Profile, 4> profiles, AngleScaling scaling = AngleScaling::ballistic);

  static AngleField constant(const CoinAngles& rates,
                             AngleScaling scaling = AngleScaling::ballistic);
  // Continuum mass m corresponds to theta_bar = -m.
  static AngleField dirac_mass(double m);

  CoinAngles rates(double t, double x) const;
  CoinAngles angles(double t, double x, double eps) const;
  bool homogeneous() const { return constant_.has_value(); }
  AngleScaling scaling() const { return scaling_; }

 private:
  std::array<Profile, 4> profiles_{};
  std::optional<CoinAngles> constant_;
  AngleScaling scaling_ = AngleScaling::ballistic;
};

// Periodic 1D lattice with spacing a = eps and time step eps.
struct LatticeGrid {
  int n_sites = 0;
  double eps = 0.0;
  double origin = 0.0;

  LatticeGrid() = default;
  LatticeGrid(int n, double eps, double origin);
  // Site n/2 sits at x = 0.
  static LatticeGrid centered(int n, double eps);

  double spacing() const { return eps; }
  double time_step() const { return eps; }
  double position(int i) const { return origin + i * eps; }
  int wrap(int i) const { return ((i % n_sites) + n_sites) % n_sites; }
};

// Amplitudes (psi_L, psi_R) per site; sum of |psi|^2 is 1 for a physical state.
struct WaveState {
  LatticeGrid grid;
  std::vector<Vec2> amp;

  WaveState() = default;
  explicit WaveState(const LatticeGrid& g) : grid(g), amp(g.n_sites, Vec2::Zero()) {}

  static WaveState localized(const LatticeGrid& g, int site, const Vec2& chirality);
  // Samples a continuum amplitude Psi(x) as psi_i = sqrt(a) Psi(x_i).
  static WaveState sampled(const LatticeGrid& g, const std::function<Vec2(double)>& psi);

  double norm_squared() const;
  std::vector<double> probabilities() const;
};

// psi_L(x) <- psi_L(x + a), psi_R(x) <- psi_R(x - a), periodic.
WaveState shift_apply(const WaveState& s);
// One step of the walk U = C S; coins evaluated at time t on the shifted state.
WaveState walk_step(const WaveState& s, const AngleField& field, double t);
// Same with per-site coins (size 1 means uniform).
WaveState walk_step_with(const WaveState& s, const std::vector<Mat2>& coins);

// Long-time spread / t of the unscaled walk with constant angle theta.
double asymptotic_spread(double theta);

// Position moments of a lattice probability vector.
double lattice_mean(const WaveState& s);
double lattice_stddev(const WaveState& s);

}  // namespace qrw
