#include "qrw/observables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace qrw {

DiagonalFields extract_diagonal(const PauliField& r, double t) {
  DiagonalFields d;
  d.grid = r.grid;
  d.t = t;
  for (int mu = 0; mu < 4; ++mu) {
    d.R[mu].resize(r.grid.n);
    for (int i = 0; i < r.grid.n; ++i) {
      const cplx z = r.at(mu, i, i);
      d.R[mu][i] = z.real();
      d.max_imag = std::max(d.max_imag, std::abs(z.imag()));
    }
  }
  return d;
}

AntiDiagonalFields extract_antidiagonal(const PauliField& r) {
  if (!r.grid.is_symmetric()) throw ConfigError("anti-diagonal needs a grid symmetric about 0");
  AntiDiagonalFields a;
  a.grid = r.grid;
  const int n = r.grid.n;
  for (int mu = 0; mu < 4; ++mu) {
    a.T[mu].resize(n);
    for (int i = 0; i < n; ++i) a.T[mu][i] = r.at(mu, i, n - 1 - i);
  }
  return a;
}

Moments moments(const std::vector<double>& R0, const PdeGrid& g) {
  if (R0.size() != static_cast<std::size_t>(g.n)) {
    throw std::invalid_argument("density length does not match grid");
  }
  double mass = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < g.n; ++i) {
    const double x = g.x(i);
    mass += R0[i];
    m1 += x * R0[i];
    m2 += x * x * R0[i];
  }
  mass *= g.dx;
  if (std::abs(mass - 1.0) > 1e-6) {
    throw NumericError("density not normalized: integral = " + std::to_string(mass));
  }
  return {m1 * g.dx, m2 * g.dx};
}

namespace {

double ls_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept,
                double* rms) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double b = my - slope * mx;
  if (intercept) *intercept = b;
  if (rms) {
    double r = 0;
    for (std::size_t i = 0; i < x.size(); ++i) r += std::pow(y[i] - (slope * x[i] + b), 2);
    *rms = std::sqrt(r / n);
  }
  return slope;
}

}  // namespace

std::vector<double> exponent_series(const MomentSeries& s, int window) {
  const int n = static_cast<int>(s.size());
  if (window < 2) throw ConfigError("exponent window must be at least 2");
  if (n < window + 1) throw ConfigError("exponent series needs at least window + 1 samples");
  for (int i = 1; i < n; ++i) {
    if (!(s.times[i] > s.times[i - 1])) throw ConfigError("sample times must increase");
  }
  std::vector<double> lt(n, kMissing), ly(n, kMissing);
  for (int i = 0; i < n; ++i) {
    const double inc = s.second_moment[i] - s.second_moment[0];
    if (s.times[i] > 0.0 && inc > 0.0) {
      lt[i] = std::log(s.times[i]);
      ly[i] = std::log(inc);
    }
  }
  std::vector<double> eta(n, kMissing);
  const int half = window / 2;
  for (int i = 0; i < n; ++i) {
    if (std::isnan(lt[i])) continue;
    int lo = std::max(0, i - half);
    int hi = lo + window - 1;
    if (hi >= n) {
      hi = n - 1;
      lo = std::max(0, hi - window + 1);
    }
    std::vector<double> x, y;
    for (int k = lo; k <= hi; ++k) {
      if (std::isnan(lt[k])) continue;
      x.push_back(lt[k]);
      y.push_back(ly[k]);
    }
    if (x.size() < 3) continue;
    eta[i] = ls_slope(x, y, nullptr, nullptr);
  }
  return eta;
}

void fill_exponent(MomentSeries& s, int window) { s.eta = exponent_series(s, window); }

RegimeTimes regime_times(const MomentSeries& s, double v_g, double tol_prop, double tol_plateau) {
  const std::size_t n = s.size();
  if (n < 3) throw ConfigError("regime analysis needs at least 3 samples");
  RegimeTimes rt;
  rt.x_plateau = s.mean_x.back();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = s.times[i];
    const double ballistic = v_g * t;
    if (std::abs(s.mean_x[i] - ballistic) <= tol_prop * std::abs(ballistic) + 1e-300) rt.t1 = t;
  }
  std::size_t first = n;
  const double band = tol_plateau * std::abs(rt.x_plateau);
  for (std::size_t i = n; i-- > 0;) {
    if (std::abs(s.mean_x[i] - rt.x_plateau) <= band) {
      first = i;
    } else {
      break;
    }
  }
  const double span = s.times.back() - s.times.front();
  if (first < n && s.times[first] <= s.times.front() + 0.9 * span) rt.t2 = s.times[first];
  double best = -1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = s.times[i] - s.times[i - 1];
    const double h1 = s.times[i + 1] - s.times[i];
    const double d2 = 2.0 * (h0 * s.mean_x[i + 1] - (h0 + h1) * s.mean_x[i] + h1 * s.mean_x[i - 1]) /
                      (h0 * h1 * (h0 + h1));
    if (std::abs(d2) > best) {
      best = std::abs(d2);
      rt.t_mid = s.times[i];
    }
  }
  return rt;
}

double continuity_residual(const DiagonalFields& prev, const DiagonalFields& next, double dt) {
  const int n = next.grid.n;
  if (prev.grid.n != n) throw std::invalid_argument("snapshots on different grids");
  const double dx = next.grid.dx;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const int ip = (i + 1) % n, im = (i + n - 1) % n;
    const double dR0 = (next.R[0][i] - prev.R[0][i]) / dt;
    const double r3p = 0.5 * (next.R[3][ip] + prev.R[3][ip]);
    const double r3m = 0.5 * (next.R[3][im] + prev.R[3][im]);
    const double dR3 = (r3p - r3m) / (2.0 * dx);
    sum += (dR0 - dR3) * (dR0 - dR3);
  }
  return std::sqrt(sum * dx);
}

DiffusionFit diffusion_fit(const MomentSeries& s, double t_start) {
  std::size_t i0 = s.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.times[i] >= t_start) {
      i0 = i;
      break;
    }
  }
  if (i0 == s.size() || s.size() - i0 < 10) {
    throw NumericError("diffusion fit needs at least 10 tail samples");
  }
  DiffusionFit fit;
  fit.samples = s.size() - i0;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = i0; i < s.size(); ++i) {
    const double x = s.times[i] - s.times[i0];
    const double y = s.second_moment[i] - s.second_moment[i0];
    sxy += x * y;
    sxx += x * x;
  }
  fit.slope = sxy / sxx;
  fit.D_est = fit.slope / 4.0;
  double r = 0.0;
  for (std::size_t i = i0; i < s.size(); ++i) {
    const double x = s.times[i] - s.times[i0];
    const double y = s.second_moment[i] - s.second_moment[i0];
    r += (y - fit.slope * x) * (y - fit.slope * x);
  }
  fit.residual = std::sqrt(r / static_cast<double>(fit.samples));
  std::vector<double> lx, ly;
  for (std::size_t i = i0; i < s.size(); ++i) {
    const double inc = s.second_moment[i] - s.second_moment[0];
    if (s.times[i] > 0.0 && inc > 0.0) {
      lx.push_back(std::log(s.times[i]));
      ly.push_back(std::log(inc));
    }
  }
  fit.eta_est = lx.size() >= 2 ? ls_slope(lx, ly, nullptr, nullptr) : kMissing;
  return fit;
}

double variance_slope(const MomentSeries& s, double t_start) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.times[i] < t_start) continue;
    x.push_back(s.times[i]);
    y.push_back(s.second_moment[i] - s.mean_x[i] * s.mean_x[i]);
  }
  if (x.size() < 10) throw NumericError("variance slope needs at least 10 tail samples");
  return ls_slope(x, y, nullptr, nullptr);
}

std::vector<int> linear_steps(int n_steps, int every) {
  if (every < 1) throw ConfigError("sampling interval must be at least 1");
  std::vector<int> out;
  for (int k = 0; k <= n_steps; k += every) out.push_back(k);
  if (out.back() != n_steps) out.push_back(n_steps);
  return out;
}

std::vector<int> log_steps(int n_steps, int count) {
  std::set<int> s{0};
  if (n_steps >= 1) {
    s.insert(n_steps);
    for (int i = 0; i < count; ++i) {
      const double f = count > 1 ? static_cast<double>(i) / (count - 1) : 1.0;
      s.insert(static_cast<int>(std::lround(std::pow(static_cast<double>(n_steps), f))));
    }
  }
  return {s.begin(), s.end()};
}

void write_series_csv(const std::string& path, const MomentSeries& s) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  auto num = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  f << "t,mean_x,second_moment,eta,trace,continuity_residual\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto at = [&](const std::vector<double>& v) { return i < v.size() ? v[i] : kMissing; };
    f << num(s.times[i]) << ',' << num(s.mean_x[i]) << ',' << num(s.second_moment[i]) << ','
      << num(at(s.eta)) << ',' << num(at(s.trace)) << ',' << num(at(s.continuity_residual))
      << '\n';
  }
  if (!f) throw std::runtime_error("write failed for " + path);
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b, double w) {
  if (a.size() != b.size()) throw std::invalid_argument("l1 distance of different lengths");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d * w;
}

}  // namespace qrw
