#include "qrw/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <numbers>
#include <sstream>

#include "qrw/analytic.hpp"
#include "qrw/coin.hpp"
#include "qrw/lattice_noise.hpp"
#include "qrw/lindblad.hpp"
#include "qrw/observables.hpp"

namespace qrw {

namespace fs = std::filesystem;

void RunReport::set(const std::string& metric, double value) {
  for (auto& [k, v] : metrics) {
    if (k == metric) {
      v = value;
      return;
    }
  }
  metrics.emplace_back(metric, value);
}

const double* RunReport::find(const std::string& metric) const {
  for (const auto& [k, v] : metrics) {
    if (k == metric) return &v;
  }
  return nullptr;
}

double RunReport::get(const std::string& metric) const {
  const double* v = find(metric);
  if (!v) throw std::out_of_range("report has no metric '" + metric + "'");
  return *v;
}

void RunReport::add_file(const std::string& role, const std::string& name) {
  files.emplace_back(role, name);
}

bool RunReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

fs::path output_root() {
  const char* env = std::getenv("QRW_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("qrw-out");
}

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
  return f;
}

Vec2 chirality_vector(Chirality c) {
  switch (c) {
    case Chirality::left:
      return Vec2(1.0, 0.0);
    case Chirality::right:
      return Vec2(0.0, 1.0);
    case Chirality::symmetric:
      break;
  }
  return Vec2(1.0, 1.0) / std::sqrt(2.0);
}

// Gaussian amplitude with |Psi|^2 of standard deviation `width`, carrier e^{i p0 x}.
std::function<Vec2(double)> gaussian_spinor(const PhysicsConfig& ph) {
  const double w = ph.width, p0 = ph.p0;
  const Vec2 c = chirality_vector(ph.chirality);
  return [w, p0, c](double x) -> Vec2 {
    const double a =
        std::exp(-x * x / (4.0 * w * w)) / std::pow(2.0 * std::numbers::pi * w * w, 0.25);
    return (a * std::polar(1.0, p0 * x)) * c;
  };
}

double initial_extent(const PhysicsConfig& ph) {
  switch (ph.initial) {
    case InitialKind::packet:
      return 4.0 / ph.sigma;
    case InitialKind::gaussian:
      return 7.0 * ph.width;
    case InitialKind::localized:
      return 0.0;
  }
  return 0.0;
}

std::function<double(double)> make_kernel(const std::string& spec) {
  if (spec == "const") return {};
  const auto colon = spec.find(':');
  const double len = std::stod(spec.substr(colon + 1));
  if (!(len > 0.0)) throw ConfigError("kernel length must be positive");
  if (spec.rfind("exp:", 0) == 0) return [len](double d) { return std::exp(-d / len); };
  return [len](double d) { return std::exp(-d * d / (2.0 * len * len)); };
}

KernelSet make_kernels(const PhysicsConfig& ph) {
  KernelSet k;
  for (int l = 0; l < 3; ++l) {
    k.gamma[l] = ph.gamma[l];
    k.kappa[l] = make_kernel(ph.kernel[l]);
  }
  return k;
}

GeneratorParams make_params(const PhysicsConfig& ph) {
  return GeneratorParams{ph.mass, ph.gamma[1], ph.gamma[2]};
}

std::vector<int> sample_schedule(const ScenarioConfig& cfg, int n_steps) {
  std::vector<int> s = cfg.numerics.sampling == "log"
                           ? log_steps(n_steps, cfg.numerics.samples)
                           : linear_steps(n_steps, std::max(1, n_steps / cfg.numerics.samples));
  // The first steps feed the early-velocity estimate.
  for (int k = 1; k <= std::min(2, n_steps); ++k) s.push_back(k);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

std::vector<int> snapshot_schedule(int count, int n_steps) {
  std::vector<int> s;
  const int c = std::max(2, count);
  for (int i = 0; i < c; ++i) {
    s.push_back(static_cast<int>(std::lround(static_cast<double>(n_steps) * i / (c - 1))));
  }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

std::string time_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t%09.4f", t);
  return buf;
}

PdeGrid pde_grid(const ScenarioConfig& cfg) {
  const NumericsConfig& nu = cfg.numerics;
  const double hw = nu.half_width > 0.0
                        ? nu.half_width
                        : initial_extent(cfg.physics) + nu.t_final + 2.0;
  return PdeGrid::symmetric(hw, nu.dx);
}

std::vector<Vec2> initial_spinor(const ScenarioConfig& cfg, const PdeGrid& g) {
  const PhysicsConfig& ph = cfg.physics;
  if (ph.initial == InitialKind::packet) return build_packet(ph.p0, ph.sigma, ph.mass, g).psi;
  const auto f = gaussian_spinor(ph);
  std::vector<Vec2> psi(g.n);
  for (int i = 0; i < g.n; ++i) psi[i] = f(g.x(i));
  return psi;
}

DiagonalFields diagonal_from_spinor(const std::vector<Vec2>& psi, const PdeGrid& g) {
  DiagonalFields d;
  d.grid = g;
  for (auto& R : d.R) R.assign(g.n, 0.0);
  for (int i = 0; i < g.n; ++i) {
    const double l = std::norm(psi[i](0)), r = std::norm(psi[i](1));
    const cplx lr = psi[i](0) * std::conj(psi[i](1));
    d.R[0][i] = l + r;
    d.R[1][i] = 2.0 * lr.real();
    d.R[2][i] = -2.0 * lr.imag();
    d.R[3][i] = l - r;
  }
  return d;
}

LatticeGrid lattice_grid(const ScenarioConfig& cfg, double eps) {
  const NumericsConfig& nu = cfg.numerics;
  int n = nu.n_sites;
  if (n == 0) {
    const double extent = initial_extent(cfg.physics) + nu.t_final + 1.0;
    n = 2 * static_cast<int>(std::ceil(extent / eps));
  }
  return LatticeGrid::centered(n, eps);
}

WaveState lattice_initial(const ScenarioConfig& cfg, const LatticeGrid& g) {
  if (cfg.physics.initial == InitialKind::localized) {
    return WaveState::localized(g, g.n_sites / 2, chirality_vector(cfg.physics.chirality));
  }
  return WaveState::sampled(g, gaussian_spinor(cfg.physics));
}

int lattice_steps(double t_final, double eps) {
  const double q = t_final / eps;
  const long k = std::lround(q);
  if (std::abs(q - static_cast<double>(k)) > 1e-6) {
    throw ConfigError("t_final must be a multiple of eps");
  }
  return static_cast<int>(k);
}

NoiseSpec lattice_noise(const PhysicsConfig& ph) {
  NoiseSpec spec;
  NoiseDistribution kind = NoiseDistribution::gaussian;
  if (ph.noise_kind == "uniform") kind = NoiseDistribution::uniform;
  if (ph.noise_kind == "two_point") kind = NoiseDistribution::two_point;
  // Matched rates: delta_1^2 = gamma1 / 2 on xi1, delta_2^2 = gamma2 / 2 on theta.
  const double derived[4] = {0.0, std::sqrt(ph.gamma[1] / 2.0), std::sqrt(ph.gamma[2] / 2.0),
                             0.0};
  for (int l = 0; l < 4; ++l) spec.comp[l] = {kind, ph.noise[l].value_or(derived[l])};
  return spec;
}

void write_lattice_density(const fs::path& p, const LatticeGrid& g, const std::vector<double>& P,
                           const std::vector<double>* se) {
  auto f = open_out(p);
  f << (se ? "x,P,se,density\n" : "x,P,density\n");
  for (int i = 0; i < g.n_sites; ++i) {
    f << num(g.position(i)) << ',' << num(P[i]);
    if (se) f << ',' << num((*se)[i]);
    f << ',' << num(P[i] / g.eps) << '\n';
  }
}

DensityProfile lattice_profile(const LatticeGrid& g, const std::vector<double>& P) {
  DensityProfile d;
  for (int i = 0; i < g.n_sites; ++i) {
    d.x.push_back(g.position(i));
    d.density.push_back(P[i] / g.eps);
  }
  return d;
}

DensityProfile pde_profile(const PdeGrid& g, const std::vector<double>& R0) {
  DensityProfile d;
  for (int i = 0; i < g.n; ++i) d.x.push_back(g.x(i));
  d.density = R0;
  return d;
}

double last_finite(const std::vector<double>& v) {
  for (auto it = v.rbegin(); it != v.rend(); ++it) {
    if (!std::isnan(*it)) return *it;
  }
  return kMissing;
}

double max_trace_drift(const MomentSeries& s) {
  double d = 0.0;
  for (double t : s.trace) d = std::max(d, std::abs(t - 1.0));
  return d;
}

double early_velocity(const MomentSeries& s, double dt) {
  if (s.size() < 3 || std::abs(s.times[1] - dt) > 1e-9 || std::abs(s.times[2] - 2 * dt) > 1e-9) {
    return kMissing;
  }
  return (-3.0 * s.mean_x[0] + 4.0 * s.mean_x[1] - s.mean_x[2]) / (2.0 * dt);
}

// Shared post-processing of a PDE moment series.
void analyse_series(RunReport& r, MomentSeries& s, const ScenarioConfig& cfg, double dt) {
  const PhysicsConfig& ph = cfg.physics;
  const double t_final = s.times.back();
  r.set("trace_drift", max_trace_drift(s));
  r.set("x_final", s.mean_x.back());
  r.set("second_moment_final", s.second_moment.back());
  r.set("v_early", early_velocity(s, dt));
  if (static_cast<int>(s.size()) > cfg.numerics.window) {
    fill_exponent(s, cfg.numerics.window);
    r.set("eta_final", last_finite(s.eta));
    double lo = INFINITY, hi = -INFINITY;
    for (double e : s.eta) {
      if (std::isnan(e)) continue;
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    r.set("eta_min", lo);
    r.set("eta_max", hi);
  }
  double res = 0.0;
  for (double c : s.continuity_residual) {
    if (!std::isnan(c)) res = std::max(res, c);
  }
  r.set("continuity_residual_max", res);
  if (ph.initial == InitialKind::packet) {
    const double vg = group_velocity(ph.p0, ph.mass);
    r.set("v_g", vg);
    if (ph.gamma[2] > 0.0 && vg != 0.0) r.set("x_lim", limit_position(vg, ph.gamma[2]));
    if (vg != 0.0) {
      const RegimeTimes rt =
          regime_times(s, vg, cfg.analysis.tol_prop, cfg.analysis.tol_plateau);
      r.set("x_plateau", rt.x_plateau);
      r.set("t1", rt.t1);
      r.set("t2", rt.t2.value_or(kMissing));
      r.set("t_mid", rt.t_mid);
    }
  }
  const double tail = cfg.analysis.tail_start.value_or(0.5 * t_final);
  try {
    const DiffusionFit fit = diffusion_fit(s, tail);
    r.set("D_est", fit.D_est);
    r.set("diffusion_residual", fit.residual);
    r.set("variance_slope", variance_slope(s, tail));
  } catch (const NumericError& e) {
    r.notes.push_back(std::string("diffusion fit skipped: ") + e.what());
  }
}

void run_walk(const ScenarioConfig& cfg, RunReport& r) {
  const int steps = cfg.numerics.steps;
  const int n = cfg.numerics.n_sites > 0 ? cfg.numerics.n_sites : 2 * steps + 8;
  const LatticeGrid g = LatticeGrid::centered(n, 1.0);
  const AngleField field =
      AngleField::constant(CoinAngles{0.0, 0.0, cfg.physics.theta, 0.0}, AngleScaling::unscaled);
  WaveState s = WaveState::localized(g, n / 2, chirality_vector(cfg.physics.chirality));
  auto f = open_out(r.dir / "series.csv");
  f << "step,mean,stddev\n";
  f << 0 << ',' << num(lattice_mean(s)) << ',' << num(lattice_stddev(s)) << '\n';
  for (int k = 1; k <= steps; ++k) {
    s = walk_step(s, field, k - 1.0);
    f << k << ',' << num(lattice_mean(s)) << ',' << num(lattice_stddev(s)) << '\n';
  }
  r.add_file("series", "series.csv");
  write_lattice_density(r.dir / "density_final.csv", g, s.probabilities(), nullptr);
  r.add_file("density_final", "density_final.csv");
  r.final_density = lattice_profile(g, s.probabilities());
  const double ratio = lattice_stddev(s) / steps;
  const double target = asymptotic_spread(cfg.physics.theta);
  r.set("spread_ratio", ratio);
  r.set("spread_target", target);
  r.set("spread_rel_error", std::abs(ratio / target - 1.0));
  r.set("norm_drift", std::abs(s.norm_squared() - 1.0));
}

void lattice_moments(const LatticeGrid& g, const std::vector<double>& P, double& mean,
                     double& second) {
  mean = second = 0.0;
  for (int i = 0; i < g.n_sites; ++i) {
    mean += g.position(i) * P[i];
    second += g.position(i) * g.position(i) * P[i];
  }
}

struct LatticeResult {
  LatticeGrid grid;
  std::vector<double> P;
  std::vector<double> se;
};

LatticeResult run_channel_model(const ScenarioConfig& cfg, double eps, RunReport* r) {
  const LatticeGrid g = lattice_grid(cfg, eps);
  if (g.n_sites > cfg.numerics.max_sites) {
    throw ConfigError("channel model needs " + std::to_string(g.n_sites) +
                      " sites, above max_sites = " + std::to_string(cfg.numerics.max_sites));
  }
  const int steps = lattice_steps(cfg.numerics.t_final, eps);
  const AngleField field = AngleField::dirac_mass(cfg.physics.mass);
  const ChannelRates rates{cfg.physics.gamma[1] / 2.0, cfg.physics.gamma[2] / 2.0};
  DensityGrid rho = DensityGrid::pure(lattice_initial(cfg, g));
  MomentSeries series;
  double drift = 0.0;
  auto record = [&](int k) {
    const auto P = rho.diagonal();
    double m1, m2;
    lattice_moments(g, P, m1, m2);
    const double tr = rho.trace().real();
    drift = std::max(drift, std::abs(tr - 1.0));
    series.push(k * eps, m1, m2, tr, kMissing);
  };
  record(0);
  for (int k = 0; k < steps; ++k) {
    rho = channel_step(rho, field, rates, k * eps);
    record(k + 1);
  }
  LatticeResult out{g, rho.diagonal(), {}};
  if (r) {
    r->set("trace_drift", drift);
    r->set("hermiticity", rho.hermiticity_error());
    r->set("purity", rho.purity());
    if (g.n_sites <= 64) r->set("min_eigenvalue", rho.min_eigenvalue());
    r->set("x_final", series.mean_x.back());
    r->set("second_moment_final", series.second_moment.back());
    write_series_csv((r->dir / "series.csv").string(), series);
    r->add_file("series", "series.csv");
  }
  return out;
}

LatticeResult run_trajectory_model(const ScenarioConfig& cfg, double eps, RunReport* r) {
  const LatticeGrid g = lattice_grid(cfg, eps);
  EnsembleRun run;
  run.field = AngleField::dirac_mass(cfg.physics.mass);
  run.noise = lattice_noise(cfg.physics);
  run.n_steps = lattice_steps(cfg.numerics.t_final, eps);
  run.n_traj = cfg.numerics.n_traj;
  run.seed = cfg.numerics.seed;
  const DiagonalEstimate est = ensemble_diagonal(run, lattice_initial(cfg, g));
  double sum_se = 0.0, total = 0.0;
  for (int i = 0; i < g.n_sites; ++i) {
    sum_se += est.std_error[i];
    total += est.mean[i];
  }
  if (r) {
    double m1, m2;
    lattice_moments(g, est.mean, m1, m2);
    r->set("sum_std_error", sum_se);
    r->set("trace_drift", std::abs(total - 1.0));
    r->set("x_final", m1);
    r->set("second_moment_final", m2);
  }
  return {g, est.mean, est.std_error};
}

void run_lattice(const ScenarioConfig& cfg, RunReport& r, bool channel) {
  const double eps = cfg.numerics.eps.front();
  const LatticeResult res =
      channel ? run_channel_model(cfg, eps, &r) : run_trajectory_model(cfg, eps, &r);
  write_lattice_density(r.dir / "density_final.csv", res.grid, res.P, channel ? nullptr : &res.se);
  r.add_file("density_final", "density_final.csv");
  r.final_density = lattice_profile(res.grid, res.P);
}

void write_pde_snapshot(RunReport& r, const ScenarioConfig& cfg, const PauliField& field,
                        double t, bool final) {
  const DiagonalFields d = extract_diagonal(field, t);
  const std::string name = final ? "density_final.csv" : "density_" + time_tag(t) + ".csv";
  write_diagonal_csv((r.dir / name).string(), d);
  r.add_file(final ? "density_final" : "density", name);
  if (cfg.output.binary) {
    const std::string bin = "dump_" + time_tag(t) + ".bin";
    write_binary_dump((r.dir / bin).string(), field, t);
    r.add_file("dump", bin);
  }
}

void run_lindblad(const ScenarioConfig& cfg, RunReport& r, bool kernel) {
  const PdeGrid g = pde_grid(cfg);
  const double dt = cfg.time_step();
  const double T = cfg.numerics.t_final;
  const int n_steps = step_count(T, dt);
  const auto psi = initial_spinor(cfg, g);
  const GeneratorParams params = make_params(cfg.physics);
  const KernelSet kernels = make_kernels(cfg.physics);
  EvolveOptions opt;
  opt.alpha = cfg.numerics.alpha;
  opt.sample_steps = sample_schedule(cfg, n_steps);
  opt.snapshot_steps = snapshot_schedule(cfg.numerics.snapshots, n_steps);
  r.set("n_grid", g.n);
  r.set("dx", g.dx);

  if (cfg.numerics.solver == PdeSolver::moments) {
    const int smax = cfg.numerics.max_separation > 0 ? cfg.numerics.max_separation : g.n;
    MomentSolver ms = kernel ? MomentSolver(g, dt, kernels, cfg.physics.mass, smax, opt.alpha)
                             : MomentSolver(g, dt, params, smax, opt.alpha);
    ms.set_from_spinor(psi);
    MomentEvolveResult res = evolve_moments(ms, T, dt, opt.sample_steps);
    r.set("max_edge_weight", res.max_edge_weight);
    analyse_series(r, res.series, cfg, dt);
    write_series_csv((r.dir / "series.csv").string(), res.series);
    r.add_file("series", "series.csv");
    return;
  }

  if (cfg.numerics.solver == PdeSolver::diagonal) {
    DiagonalEvolveResult res =
        evolve_diagonal(diagonal_from_spinor(psi, g), params, T, dt, opt);
    analyse_series(r, res.series, cfg, dt);
    write_series_csv((r.dir / "series.csv").string(), res.series);
    r.add_file("series", "series.csv");
    for (std::size_t i = 0; i < res.snapshots.size(); ++i) {
      const bool final = i + 1 == res.snapshots.size();
      const std::string name =
          final ? "density_final.csv" : "density_" + time_tag(res.snapshots[i].t) + ".csv";
      write_diagonal_csv((r.dir / name).string(), res.snapshots[i]);
      r.add_file(final ? "density_final" : "density", name);
    }
    r.final_density = pde_profile(g, res.snapshots.back().R[0]);
    return;
  }

  if (g.n > 4001) {
    throw ConfigError("full grid of " + std::to_string(g.n) +
                      " points is too large; use solver = moments or a coarser dx");
  }
  const PauliField init = pauli_from_spinor(psi, g);
  EvolveResult res = kernel ? evolve(init, kernels, cfg.physics.mass, T, dt, opt)
                            : evolve(init, params, T, dt, opt);
  analyse_series(r, res.series, cfg, dt);
  write_series_csv((r.dir / "series.csv").string(), res.series);
  r.add_file("series", "series.csv");
  double herm = 0.0, imag = 0.0;
  for (std::size_t i = 0; i < res.snapshots.size(); ++i) {
    herm = std::max(herm, res.snapshots[i].hermiticity_error());
    imag = std::max(imag, extract_diagonal(res.snapshots[i]).max_imag);
    write_pde_snapshot(r, cfg, res.snapshots[i], res.snapshot_times[i],
                       i + 1 == res.snapshots.size());
  }
  r.set("hermiticity", herm);
  r.set("diagonal_max_imag", imag);
  const PauliField& last = res.snapshots.back();
  r.final_density = pde_profile(g, extract_diagonal(last).R[0]);
  {
    const AntiDiagonalFields a = extract_antidiagonal(last);
    auto f = open_out(r.dir / "antidiagonal_final.csv");
    f << "x,re_T0,im_T0,re_T1,im_T1,re_T2,im_T2,re_T3,im_T3\n";
    for (int i = 0; i < g.n; ++i) {
      f << num(g.x(i));
      for (int mu = 0; mu < 4; ++mu) f << ',' << num(a.T[mu][i].real()) << ',' << num(a.T[mu][i].imag());
      f << '\n';
    }
    r.add_file("antidiagonal_final", "antidiagonal_final.csv");
  }

  if (kernel) {
    // Reference with every kappa = 1; the identity channel then drops out.
    EvolveOptions ref_opt = opt;
    ref_opt.snapshot_steps = {n_steps};
    const EvolveResult ref = evolve(init, params, T, dt, ref_opt);
    const PauliField& h = ref.snapshots.back();
    double diff = 0.0;
    for (int mu = 0; mu < 4; ++mu) {
      for (std::size_t c = 0; c < last.c[mu].size(); ++c) {
        diff = std::max(diff, std::abs(last.c[mu][c] - h.c[mu][c]));
      }
    }
    r.set("homogeneous_max_diff", diff);
    // Coherence along x - x' = d relative to the reference run.
    auto band_norm = [&](const PauliField& f, int d) {
      double s = 0.0;
      for (int i = 0; i < g.n; ++i) s += std::norm(f.at(0, i, g.wrap(i - d)));
      return std::sqrt(s);
    };
    const int d1 = std::max(1, static_cast<int>(std::lround(1.0 / g.dx)));
    const double r0 = band_norm(last, 0) / band_norm(h, 0);
    const double r1 = band_norm(last, d1) / band_norm(h, d1);
    r.set("coherence_ratio_d0", r0);
    r.set("coherence_ratio_d1", r1);
    r.set("coherence_decay_faster", r1 < r0 ? 1.0 : 0.0);
  }
}

void run_telegraph(const ScenarioConfig& cfg, RunReport& r) {
  const PdeGrid g = pde_grid(cfg);
  const double dt = cfg.time_step();
  const double T = cfg.numerics.t_final;
  const PhysicsConfig& ph = cfg.physics;
  const DiagonalFields init = diagonal_from_spinor(initial_spinor(cfg, g), g);
  DiagonalSolver solver(g, dt, make_params(ph), cfg.numerics.alpha);
  solver.set(init.R[0], init.R[3]);
  solver.advance(step_count(T, dt));
  const DiagonalFields d = solver.fields(T);

  // R0 = |Psi|^2 and R3 = s |Psi|^2 with s fixed by the chirality; d_t R0 = d_x R3.
  const Vec2 c = chirality_vector(ph.chirality);
  const double s = std::norm(c(0)) - std::norm(c(1));
  const double w = ph.width;
  auto f = [w](double x) {
    return std::exp(-x * x / (2.0 * w * w)) / std::sqrt(2.0 * std::numbers::pi * w * w);
  };
  InitialData1D data;
  data.f = f;
  data.g = [f, s, w](double x) { return -s * x / (w * w) * f(x); };
  data.lo = -12.0 * w;
  data.hi = 12.0 * w;
  const TelegraphParams tp{ph.gamma[1], ph.gamma[2]};
  const double half = 0.5 * (g.x(g.n - 1) - g.x(0));
  double err = 0.0;
  auto out = open_out(r.dir / "telegraph.csv");
  out << "x,pde,oracle\n";
  for (int i = 0; i < g.n; ++i) {
    const double x = g.x(i);
    // Points whose dependence cone wraps around the periodic grid are skipped.
    if (std::abs(x) + T + 12.0 * w > 2.0 * half) continue;
    const double o = telegraph_solution(tp, data, T, x);
    err = std::max(err, std::abs(d.R[0][i] - o));
    out << num(x) << ',' << num(d.R[0][i]) << ',' << num(o) << '\n';
  }
  r.add_file("telegraph", "telegraph.csv");
  write_diagonal_csv((r.dir / "density_final.csv").string(), d);
  r.add_file("density_final", "density_final.csv");
  r.final_density = pde_profile(g, d.R[0]);
  r.set("max_error", err);
  if (ph.gamma[1] == 0.0 && ph.gamma[2] == 0.0) {
    r.set("dalembert_error", err);
    r.checks.push_back({"dalembert_error", "max 1e-6", err, err <= 1e-6});
  }
}

void run_fourier(const ScenarioConfig& cfg, RunReport& r) {
  const PdeGrid g = pde_grid(cfg);
  const double dt = cfg.time_step();
  const double T = cfg.numerics.t_final;
  const GeneratorParams p = make_params(cfg.physics);
  const auto psi = initial_spinor(cfg, g);
  if (p.mass == 0.0) {
    const DiagonalFields init = diagonal_from_spinor(psi, g);
    const DiagonalFields fo = fourier_propagate_diagonal(init, p, T);
    DiagonalSolver solver(g, dt, p, cfg.numerics.alpha);
    solver.set(init.R[0], init.R[3]);
    solver.advance(step_count(T, dt));
    const DiagonalFields st = solver.fields(T);
    double diff = 0.0;
    auto out = open_out(r.dir / "fourier_diagonal.csv");
    out << "x,R0_fourier,R0_strang,R3_fourier,R3_strang\n";
    for (int i = 0; i < g.n; ++i) {
      diff = std::max({diff, std::abs(fo.R[0][i] - st.R[0][i]), std::abs(fo.R[3][i] - st.R[3][i])});
      out << num(g.x(i)) << ',' << num(fo.R[0][i]) << ',' << num(st.R[0][i]) << ','
          << num(fo.R[3][i]) << ',' << num(st.R[3][i]) << '\n';
    }
    r.add_file("fourier_diagonal", "fourier_diagonal.csv");
    r.set("max_diag_diff", diff);
    r.final_density = pde_profile(g, st.R[0]);
  }
  if (cfg.numerics.full_check || p.mass != 0.0) {
    if (g.n > 1201) {
      throw ConfigError("full Fourier check needs n <= 1201; coarsen dx or disable full_check");
    }
    const PauliField init = pauli_from_spinor(psi, g);
    const PauliField fo = fourier_propagate(init, p, T);
    EvolveOptions opt;
    opt.alpha = cfg.numerics.alpha;
    opt.sample_steps = {0};
    const EvolveResult st = evolve(init, p, T, dt, opt);
    const PauliField& last = st.snapshots.back();
    double diff = 0.0, ddiff = 0.0;
    for (int mu = 0; mu < 4; ++mu) {
      for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.n; ++j) {
          const double e = std::abs(fo.at(mu, i, j) - last.at(mu, i, j));
          diff = std::max(diff, e);
          if (i == j) ddiff = std::max(ddiff, e);
        }
      }
    }
    r.set("max_full_diff", diff);
    r.set("max_full_diag_diff", ddiff);
    write_diagonal_csv((r.dir / "density_final.csv").string(), extract_diagonal(fo, T));
    r.add_file("density_final", "density_final.csv");
    if (r.final_density.x.empty()) r.final_density = pde_profile(g, extract_diagonal(last).R[0]);
  }
}

void run_dirac_free(const ScenarioConfig& cfg, RunReport& r) {
  const PdeGrid g = pde_grid(cfg);
  const PhysicsConfig& ph = cfg.physics;
  const PacketState packet = build_packet(ph.p0, ph.sigma, ph.mass, g);
  const double dt = cfg.numerics.dx;
  const int n_steps = step_count(cfg.numerics.t_final, dt);
  MomentSeries s;
  std::vector<Vec2> psi;
  for (int k : sample_schedule(cfg, n_steps)) {
    psi = free_evolve(packet, k * dt);
    s.push(k * dt, spinor_mean(psi, g), spinor_second_moment(psi, g), spinor_norm(psi, g),
           kMissing);
  }
  analyse_series(r, s, cfg, dt);
  const EnergyContent e = energy_content(packet.psi, g, ph.mass);
  r.set("energy_positive", e.positive);
  r.set("energy_negative", e.negative);
  write_series_csv((r.dir / "series.csv").string(), s);
  r.add_file("series", "series.csv");
  const DiagonalFields d = diagonal_from_spinor(psi, g);
  write_diagonal_csv((r.dir / "density_final.csv").string(), d);
  r.add_file("density_final", "density_final.csv");
  r.final_density = pde_profile(g, d.R[0]);
}

double interpolate(const DensityProfile& p, double x) {
  if (p.x.empty() || x < p.x.front() || x > p.x.back()) return 0.0;
  const auto it = std::lower_bound(p.x.begin(), p.x.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - p.x.begin());
  if (j == 0) return p.density[0];
  const double x0 = p.x[j - 1], x1 = p.x[j];
  const double u = (x - x0) / (x1 - x0);
  return (1.0 - u) * p.density[j - 1] + u * p.density[j];
}

void run_compare(const ScenarioConfig& cfg, RunReport& r) {
  const PdeGrid g = pde_grid(cfg);
  const double dt = cfg.time_step();
  EvolveOptions opt;
  opt.alpha = cfg.numerics.alpha;
  opt.sample_steps = {0};
  const EvolveResult ref =
      evolve(pauli_from_spinor(initial_spinor(cfg, g), g), make_params(cfg.physics),
             cfg.numerics.t_final, dt, opt);
  const DensityProfile pde = pde_profile(g, extract_diagonal(ref.snapshots.back()).R[0]);
  write_diagonal_csv((r.dir / "density_pde.csv").string(), extract_diagonal(ref.snapshots.back()));
  r.add_file("density", "density_pde.csv");
  r.final_density = pde;

  std::vector<double> eps = cfg.numerics.eps;
  std::sort(eps.rbegin(), eps.rend());
  auto out = open_out(r.dir / "compare.csv");
  out << "eps,l1\n";
  std::vector<double> l1s;
  for (double e : eps) {
    const LatticeResult lat = cfg.base == ScenarioKind::channel
                                  ? run_channel_model(cfg, e, nullptr)
                                  : run_trajectory_model(cfg, e, nullptr);
    const DensityProfile prof = lattice_profile(lat.grid, lat.P);
    double l1 = 0.0;
    for (std::size_t i = 0; i < prof.x.size(); ++i) {
      l1 += std::abs(prof.density[i] - interpolate(pde, prof.x[i])) * e;
    }
    l1s.push_back(l1);
    out << num(e) << ',' << num(l1) << '\n';
    r.set("l1_eps_" + short_num(e), l1);
    const std::string name = "density_eps_" + short_num(e) + ".csv";
    write_lattice_density(r.dir / name, lat.grid, lat.P, nullptr);
    r.add_file("density", name);
  }
  r.add_file("compare", "compare.csv");
  bool monotone = true;
  for (std::size_t i = 1; i < l1s.size(); ++i) monotone = monotone && l1s[i] < l1s[i - 1];
  r.set("l1_monotone", monotone ? 1.0 : 0.0);
}

void evaluate(RunReport& r, const ScenarioConfig& cfg) {
  for (const Expectation& e : cfg.expect) {
    const double* v = r.find(e.metric);
    CheckResult c{e.metric, e.text, v ? *v : kMissing, v && e.holds(*v)};
    if (!v) r.notes.push_back("expected metric '" + e.metric + "' was not produced");
    r.checks.push_back(c);
  }
}

}  // namespace

double density_l1(const DensityProfile& a, const DensityProfile& b) {
  if (a.x.size() < 2) throw std::invalid_argument("density profile too short");
  double s = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    const double w = i + 1 < a.x.size() ? a.x[i + 1] - a.x[i] : a.x[i] - a.x[i - 1];
    s += std::abs(a.density[i] - interpolate(b, a.x[i])) * w;
  }
  return s;
}

RunReport run(const ScenarioConfig& cfg, const fs::path& dir) {
  if (cfg.scenario == ScenarioKind::sweep) return run_sweep(cfg, cfg.numerics.eps, dir);
  fs::create_directories(dir);
  RunReport r;
  r.name = cfg.name.empty() ? to_string(cfg.scenario) : cfg.name;
  r.scenario = to_string(cfg.scenario);
  r.config_echo = cfg.source;
  r.dir = dir;
  {
    auto f = open_out(dir / "config.cfg");
    f << cfg.source;
  }
  r.add_file("config", "config.cfg");
  switch (cfg.scenario) {
    case ScenarioKind::walk:
      run_walk(cfg, r);
      break;
    case ScenarioKind::channel:
      run_lattice(cfg, r, true);
      break;
    case ScenarioKind::trajectories:
      run_lattice(cfg, r, false);
      break;
    case ScenarioKind::lindblad:
      run_lindblad(cfg, r, false);
      break;
    case ScenarioKind::kernel_lindblad:
      run_lindblad(cfg, r, true);
      break;
    case ScenarioKind::telegraph:
      run_telegraph(cfg, r);
      break;
    case ScenarioKind::fourier:
      run_fourier(cfg, r);
      break;
    case ScenarioKind::dirac_free:
      run_dirac_free(cfg, r);
      break;
    case ScenarioKind::compare:
      run_compare(cfg, r);
      break;
    case ScenarioKind::sweep:
      break;
  }
  evaluate(r, cfg);
  write_report(r);
  return r;
}

RunReport run(const ScenarioConfig& cfg) {
  fs::path dir = cfg.output.dir.empty() ? fs::path(cfg.name.empty() ? "run" : cfg.name)
                                        : fs::path(cfg.output.dir);
  if (dir.is_relative()) dir = output_root() / dir;
  return run(cfg, dir);
}

RunReport run_sweep(const ScenarioConfig& cfg, const std::vector<double>& eps_in,
                    const fs::path& dir) {
  if (eps_in.empty()) throw ConfigError("sweep needs at least one eps value");
  fs::create_directories(dir);
  std::vector<double> eps = eps_in;
  std::sort(eps.rbegin(), eps.rend());
  const ScenarioKind base = cfg.scenario == ScenarioKind::sweep ? cfg.base : cfg.scenario;
  const bool pde = is_pde_scenario(base);

  std::vector<std::future<RunReport>> jobs;
  for (double e : eps) {
    ScenarioConfig c = cfg;
    c.scenario = base;
    c.expect.clear();
    if (pde) {
      c.numerics.dx = e;
      c.numerics.dt.reset();
    } else {
      c.numerics.eps = {e};
    }
    c.name = cfg.name + "_eps_" + short_num(e);
    const fs::path sub = dir / ("eps_" + short_num(e));
    jobs.push_back(std::async(std::launch::async, [c, sub] { return run(c, sub); }));
  }
  std::vector<RunReport> runs;
  for (auto& j : jobs) runs.push_back(j.get());

  RunReport r;
  r.name = cfg.name.empty() ? "sweep" : cfg.name;
  r.scenario = "sweep";
  r.config_echo = cfg.source;
  r.dir = dir;
  {
    auto f = open_out(dir / "config.cfg");
    f << cfg.source;
  }
  r.add_file("config", "config.cfg");
  auto out = open_out(dir / "sweep.csv");
  out << "eps,l1_to_finest,status\n";
  const DensityProfile& finest = runs.back().final_density;
  std::vector<double> l1s;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const double l1 = i + 1 < runs.size() && !finest.x.empty() && !runs[i].final_density.x.empty()
                          ? density_l1(finest, runs[i].final_density)
                          : 0.0;
    if (i + 1 < runs.size()) {
      l1s.push_back(l1);
      r.set("l1_to_finest_eps_" + short_num(eps[i]), l1);
    }
    out << num(eps[i]) << ',' << num(l1) << ',' << (runs[i].passed() ? "pass" : "fail") << '\n';
    for (const auto& [k, v] : runs[i].metrics) r.set(k + "@eps_" + short_num(eps[i]), v);
    const std::string density = "eps_" + short_num(eps[i]) + "/density_final.csv";
    if (fs::exists(dir / density)) r.add_file("density", density);
  }
  r.add_file("sweep", "sweep.csv");
  bool monotone = true;
  for (std::size_t i = 1; i < l1s.size(); ++i) monotone = monotone && l1s[i] < l1s[i - 1];
  r.set("l1_monotone", monotone ? 1.0 : 0.0);
  r.final_density = finest;
  evaluate(r, cfg);
  write_report(r);
  return r;
}

std::string format_report(const RunReport& r) {
  std::ostringstream o;
  o << "run:      " << r.name << "\n";
  o << "scenario: " << r.scenario << "\n";
  o << "status:   " << (r.passed() ? "PASS" : "FAIL") << "\n\nmetrics:\n";
  for (const auto& [k, v] : r.metrics) o << "  " << k << " = " << num(v) << "\n";
  if (!r.checks.empty()) {
    o << "\nchecks:\n";
    for (const auto& c : r.checks) {
      o << "  [" << (c.pass ? "pass" : "FAIL") << "] " << c.metric << " = " << num(c.value)
        << "  (expected " << c.rule << ")\n";
    }
  }
  if (!r.files.empty()) {
    o << "\nfiles:\n";
    for (const auto& [role, name] : r.files) o << "  " << role << ": " << name << "\n";
  }
  for (const auto& n : r.notes) o << "note: " << n << "\n";
  return o.str();
}

void write_report(const RunReport& r) {
  {
    auto f = open_out(r.dir / "report.kv");
    f << "name = " << r.name << "\n";
    f << "scenario = " << r.scenario << "\n";
    f << "status = " << (r.passed() ? "pass" : "fail") << "\n";
    for (const auto& [k, v] : r.metrics) f << "metric." << k << " = " << num(v) << "\n";
    for (std::size_t i = 0; i < r.checks.size(); ++i) {
      const auto& c = r.checks[i];
      f << "check." << i << " = " << (c.pass ? "pass" : "fail") << " | " << c.metric << " | "
        << c.rule << " | " << num(c.value) << "\n";
    }
    for (const auto& [role, name] : r.files) f << "file." << role << " = " << name << "\n";
    for (const auto& n : r.notes) f << "note = " << n << "\n";
  }
  auto f = open_out(r.dir / "report.txt");
  f << format_report(r);
}

RunReport read_report(const fs::path& dir) {
  std::ifstream f(dir / "report.kv");
  if (!f) throw std::runtime_error("no report.kv in " + dir.string());
  RunReport r;
  r.dir = dir;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(' ');
    const auto e = s.find_last_not_of(' ');
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(f, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    if (key == "name") {
      r.name = value;
    } else if (key == "scenario") {
      r.scenario = value;
    } else if (key.rfind("metric.", 0) == 0) {
      r.metrics.emplace_back(key.substr(7), std::strtod(value.c_str(), nullptr));
    } else if (key.rfind("check.", 0) == 0) {
      std::vector<std::string> parts;
      std::stringstream in(value);
      std::string part;
      while (std::getline(in, part, '|')) parts.push_back(trim(part));
      if (parts.size() == 4) {
        r.checks.push_back(
            {parts[1], parts[2], std::strtod(parts[3].c_str(), nullptr), parts[0] == "pass"});
      }
    } else if (key.rfind("file.", 0) == 0) {
      r.files.emplace_back(key.substr(5), value);
    } else if (key == "note") {
      r.notes.push_back(value);
    }
  }
  std::ifstream cfg(dir / "config.cfg");
  std::stringstream buf;
  buf << cfg.rdbuf();
  r.config_echo = buf.str();
  return r;
}

namespace {

// 1-based column holding R0 or the lattice density.
int density_column(const fs::path& csv) {
  std::ifstream f(csv);
  std::string header;
  std::getline(f, header);
  std::stringstream in(header);
  std::string col;
  for (int i = 1; std::getline(in, col, ','); ++i) {
    if (col == "R0" || col == "density") return i;
  }
  return 2;
}

}  // namespace

fs::path emit_plot_script(const RunReport& r, const std::string& kind) {
  if (r.files.empty() && r.metrics.empty()) throw std::runtime_error("empty report: nothing to plot");
  std::vector<std::string> inputs;
  for (const auto& [role, name] : r.files) {
    const bool density = role == "density" || role == "density_final";
    if ((kind == "density" && density) || (kind != "density" && role == "series")) {
      inputs.push_back(name);
    }
  }
  if (kind != "density" && kind != "mean" && kind != "eta") {
    throw std::invalid_argument("plot kind must be density, mean or eta");
  }
  if (inputs.empty()) throw std::runtime_error("report lists no files for a " + kind + " plot");
  for (const auto& name : inputs) {
    if (!fs::exists(r.dir / name)) throw std::runtime_error("missing file " + name);
  }
  const fs::path path = r.dir / ("plot_" + kind + ".gp");
  auto f = open_out(path);
  f << "# gnuplot script for " << r.name << " (" << kind << ")\n";
  f << "set datafile separator ','\nset key outside\nset term pngcairo size 900,600\n";
  f << "set output 'plot_" << kind << ".png'\n";
  if (kind == "density") {
    f << "set xlabel 'x'\nset ylabel 'R0'\nplot \\\n";
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      f << "  '" << inputs[i] << "' using 1:" << density_column(r.dir / inputs[i])
        << " with lines title '" << inputs[i] << "'"
        << (i + 1 < inputs.size() ? ", \\\n" : "\n");
    }
  } else if (kind == "mean") {
    f << "set xlabel 't'\nset ylabel '<x>'\nplot '" << inputs[0]
      << "' using 1:2 with lines title '<x>_t'";
    if (const double* vg = r.find("v_g")) f << ", " << num(*vg) << "*x dashtype 2 title 'v_g t'";
    if (const double* xl = r.find("x_lim")) f << ", " << num(*xl) << " dashtype 3 title 'x_lim'";
    f << "\n";
  } else {
    f << "set xlabel 't'\nset ylabel 'eta'\nset logscale x\nset yrange [0:2.5]\nplot '"
      << inputs[0] << "' using 1:4 with lines title 'eta_t', 1 dashtype 2 notitle, "
      << "2 dashtype 2 notitle\n";
  }
  return path;
}

}  // namespace qrw
