#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qrw/fields.hpp"

namespace qrw {

DiagonalFields extract_diagonal(const PauliField& r, double t = 0.0);
// Requires a symmetric grid so that -x_i is a grid point.
AntiDiagonalFields extract_antidiagonal(const PauliField& r);

struct Moments {
  double mean = 0.0;
  double second = 0.0;
};

// Midpoint sums of x R0 dx and x^2 R0 dx; throws NumericError if |sum R0 dx - 1| > 1e-6.
Moments moments(const std::vector<double>& R0, const PdeGrid& g);

// eta_t = d ln(<x^2>_t - <x^2>_0) / d ln t, least-squares slope over a sliding window of
// samples in log time. Samples without a full set of positive increments are NaN.
std::vector<double> exponent_series(const MomentSeries& s, int window = 7);
void fill_exponent(MomentSeries& s, int window = 7);

struct RegimeTimes {
  double t1 = 0.0;
  std::optional<double> t2;
  double t_mid = 0.0;
  double x_plateau = 0.0;
};

RegimeTimes regime_times(const MomentSeries& s, double v_g, double tol_prop = 0.02,
                         double tol_plateau = 0.01);

// L2 norm of (R0_next - R0_prev)/dt - d_x R3 at the half step, centered in space.
double continuity_residual(const DiagonalFields& prev, const DiagonalFields& next, double dt);

struct DiffusionFit {
  double D_est = 0.0;  // slope / 4
  double slope = 0.0;
  double eta_est = 0.0;
  double residual = 0.0;  // rms of the linear fit
  std::size_t samples = 0;
};

// Fits <x^2>_t - <x^2>_{t_start} = 4 D (t - t_start) over samples with t >= t_start.
DiffusionFit diffusion_fit(const MomentSeries& s, double t_start);

// Least-squares slope of <x^2> - <x>^2 over samples with t >= t_start.
double variance_slope(const MomentSeries& s, double t_start);

// Sample step indices 0..n_steps: every `every` steps, always including n_steps.
std::vector<int> linear_steps(int n_steps, int every);
// Roughly log-spaced distinct steps in [1, n_steps] plus step 0.
std::vector<int> log_steps(int n_steps, int count);

// Columns t, mean_x, second_moment, eta, trace, continuity_residual; missing values as "nan".
void write_series_csv(const std::string& path, const MomentSeries& s);

// sum |a_i - b_i| * w.
double l1_distance(const std::vector<double>& a, const std::vector<double>& b, double w = 1.0);

}  // namespace qrw
