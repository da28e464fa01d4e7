#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "qrw/fields.hpp"
#include "qrw/lattice_noise.hpp"

namespace qrw {

// Dirac mass and the two channel rates; electromagnetic potentials are zero.
struct GeneratorParams {
  double mass = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  void validate() const;
};

// Jump channels l = 0, 1, 2 with operators I, sigma3, sigma1; empty kappa means kappa == 1.
struct KernelSet {
  std::array<double, 3> gamma{};
  std::array<std::function<double(double)>, 3> kappa{};

  double kernel(int l, double d) const { return kappa[l] ? kappa[l](d) : 1.0; }
  void validate() const;
};

const Mat4& unitary_U();
// Transport Jacobians in  d_t r + A d_x r + A' d_x' r = F r.
Mat4 jacobian_A();
Mat4 jacobian_Aprime();
// Source generator F in the Pauli basis.
Mat4 noise_generator(const GeneratorParams& p);
// Pauli-basis generator at separation d: mass part plus sum_l (gamma_l/2)(kappa_l L rho L - rho).
Mat4 kernel_generator(const KernelSet& k, double mass, double d);
// S = U F U^-1.
Mat4 characteristic_source(const Mat4& F);
// (I - (1-alpha) dt S)^-1 (I + alpha dt S).
Mat4 source_propagator(const Mat4& S, double dt, double alpha);

PauliField pauli_from_density(const DensityGrid& rho);
DensityGrid density_from_pauli(const PauliField& r);
// Pure continuum state with amplitudes psi(x_i) on the grid.
PauliField pauli_from_spinor(const std::vector<Vec2>& psi, const PdeGrid& grid);

CharacteristicField v_transform(const PauliField& r);
PauliField v_inverse(const CharacteristicField& v);

// Advection speeds (lambda, lambda') of component mu.
std::array<int, 2> characteristic_speeds(int mu);

void require_exact_advection(const PdeGrid& g, double dt);

void apply_shift(CharacteristicField& v);
void apply_source(CharacteristicField& v, const Mat4& M);
// Per-cell propagator chosen by periodic index distance min(|i-j|, n-|i-j|).
void apply_source(CharacteristicField& v, const std::vector<Mat4>& by_distance);

CharacteristicField homogeneous_step(CharacteristicField v, double dt);
CharacteristicField source_step(CharacteristicField v, double dt, const GeneratorParams& p,
                                double alpha = 0.5);
CharacteristicField strang_step(CharacteristicField v, double dt, const GeneratorParams& p,
                                double alpha = 0.5);
// Uses p.mass; the rates come from the kernel set.
CharacteristicField kernel_source_step(CharacteristicField v, double dt, const KernelSet& k,
                                       const GeneratorParams& p, double alpha = 0.5);

// Half-source / shift / half-source with consecutive half steps fused.
class StrangSolver {
 public:
  StrangSolver(const PdeGrid& g, double dt, const GeneratorParams& p, double alpha = 0.5);
  StrangSolver(const PdeGrid& g, double dt, const KernelSet& k, double mass, double alpha = 0.5);

  void advance(CharacteristicField& v, int steps) const;
  const std::vector<Mat4>& half() const { return half_; }

 private:
  void apply(CharacteristicField& v, const std::vector<Mat4>& m) const;
  std::vector<Mat4> half_;
  std::vector<Mat4> full_;
};

struct EvolveOptions {
  double alpha = 0.5;
  // Steps at which moments are recorded; empty means every step.
  std::vector<int> sample_steps;
  // Steps at which full snapshots are kept; empty means first and last.
  std::vector<int> snapshot_steps;
  double blowup_limit = 1e6;
};

struct EvolveResult {
  std::vector<PauliField> snapshots;
  std::vector<double> snapshot_times;
  MomentSeries series;
};

int step_count(double t_final, double dt);

EvolveResult evolve(const PauliField& init, const GeneratorParams& p, double t_final, double dt,
                    const EvolveOptions& opt = {});
EvolveResult evolve(const PauliField& init, const KernelSet& k, double mass, double t_final,
                    double dt, const EvolveOptions& opt = {});

// Massless fast path: (v0, v3) restricted to the diagonal form a closed system.
class DiagonalSolver {
 public:
  DiagonalSolver(const PdeGrid& g, double dt, const GeneratorParams& p, double alpha = 0.5);
  void set(const std::vector<double>& R0, const std::vector<double>& R3);
  void advance(int steps);
  DiagonalFields fields(double t) const;

 private:
  PdeGrid grid_;
  std::array<cplx, 4> half_{};  // (00, 03, 30, 33) block of the half-step propagator
  std::vector<cplx> v0_, v3_;
  void apply_half();
};

struct DiagonalEvolveResult {
  std::vector<DiagonalFields> snapshots;
  MomentSeries series;
};

DiagonalEvolveResult evolve_diagonal(const DiagonalFields& init, const GeneratorParams& p,
                                     double t_final, double dt, const EvolveOptions& opt = {});

// Center-of-mass moments of v^mu per separation s = i - j:
//   M_k^mu(s) = sum_{i-j=s} c^k v^mu(i, j) dx, c = (x_i + x_j) / 2, k = 0, 1, 2.
// Reproduces the full-grid Strang values of <x> and <x^2> without storing (x, x').
class MomentSolver {
 public:
  MomentSolver(const PdeGrid& g, double dt, const GeneratorParams& p, int max_separation,
               double alpha = 0.5);
  MomentSolver(const PdeGrid& g, double dt, const KernelSet& k, double mass, int max_separation,
               double alpha = 0.5);

  void set_from_pauli(const PauliField& r);
  void set_from_spinor(const std::vector<Vec2>& psi);
  void advance(int steps);

  double trace() const;
  double mean() const;
  double second_moment() const;
  // Largest |M_0| over the outermost 2 separations on each side.
  double edge_weight() const;
  int max_separation() const { return smax_; }

 private:
  PdeGrid grid_;
  int smax_;
  std::vector<Mat4> half_;  // size 1 or per |s|
  std::array<std::array<std::vector<cplx>, 4>, 3> m_;
  void apply_source(const std::vector<Mat4>& mats);
  void shift();
  cplx r_at_zero(int k, int mu) const;
  const Mat4& mat(const std::vector<Mat4>& mats, int s) const;
};

struct MomentEvolveResult {
  MomentSeries series;
  double max_edge_weight = 0.0;
};

MomentEvolveResult evolve_moments(MomentSolver& solver, double t_final, double dt,
                                  const std::vector<int>& sample_steps);

void write_pauli_csv(const std::string& path, const PauliField& r);
void write_diagonal_csv(const std::string& path, const DiagonalFields& d);
// Header: "DLQW", uint64 n, f64 dx, f64 t; then 4 planes of n*n (re, im) pairs, little-endian.
void write_binary_dump(const std::string& path, const PauliField& r, double t);
struct BinaryDump {
  int n = 0;
  double dx = 0.0;
  double t = 0.0;
  std::array<std::vector<cplx>, 4> planes;
};
BinaryDump read_binary_dump(const std::string& path);

}  // namespace qrw
