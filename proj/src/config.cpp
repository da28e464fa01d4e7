#include "qrw/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace qrw {

namespace {

const std::map<ScenarioKind, std::string>& scenario_names() {
  static const std::map<ScenarioKind, std::string> names{
      {ScenarioKind::walk, "walk"},
      {ScenarioKind::channel, "channel"},
      {ScenarioKind::trajectories, "trajectories"},
      {ScenarioKind::lindblad, "lindblad"},
      {ScenarioKind::kernel_lindblad, "kernel-lindblad"},
      {ScenarioKind::telegraph, "telegraph"},
      {ScenarioKind::fourier, "fourier"},
      {ScenarioKind::dirac_free, "dirac-free"},
      {ScenarioKind::compare, "compare"},
      {ScenarioKind::sweep, "sweep"}};
  return names;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> to_int(const std::string& s) {
  long long v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

std::optional<bool> to_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  return std::nullopt;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

struct Parser {
  ScenarioConfig cfg;
  std::vector<std::string> errors;
  std::set<std::string> seen;

  void error(int line, const std::string& msg) {
    errors.push_back(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg);
  }

  bool has(const std::string& key) const { return seen.count(key) > 0; }

  using Handler = std::function<void(const std::string&, int)>;

  Handler real(double& dst) {
    return [this, &dst](const std::string& v, int line) {
      if (auto d = to_double(v)) {
        dst = *d;
      } else {
        error(line, "expected a number, got '" + v + "'");
      }
    };
  }

  Handler opt_real(std::optional<double>& dst) {
    return [this, &dst](const std::string& v, int line) {
      if (auto d = to_double(v)) {
        dst = *d;
      } else {
        error(line, "expected a number, got '" + v + "'");
      }
    };
  }

  template <class I>
  Handler integer(I& dst) {
    return [this, &dst](const std::string& v, int line) {
      if (auto d = to_int(v)) {
        dst = static_cast<I>(*d);
      } else {
        error(line, "expected an integer, got '" + v + "'");
      }
    };
  }

  Handler boolean(bool& dst) {
    return [this, &dst](const std::string& v, int line) {
      if (auto b = to_bool(v)) {
        dst = *b;
      } else {
        error(line, "expected true or false, got '" + v + "'");
      }
    };
  }

  Handler text(std::string& dst) {
    return [&dst](const std::string& v, int) { dst = v; };
  }

  template <class E>
  Handler choice(E& dst, std::map<std::string, E> options) {
    return [this, &dst, options](const std::string& v, int line) {
      auto it = options.find(v);
      if (it == options.end()) {
        std::string all;
        for (const auto& [k, _] : options) all += (all.empty() ? "" : ", ") + k;
        error(line, "unknown value '" + v + "' (expected one of: " + all + ")");
      } else {
        dst = it->second;
      }
    };
  }

  Handler scenario(ScenarioKind& dst) {
    return [this, &dst](const std::string& v, int line) {
      if (auto k = scenario_from_string(v)) {
        dst = *k;
      } else {
        error(line, "unknown scenario '" + v + "'");
      }
    };
  }

  std::map<std::string, Handler> handlers() {
    PhysicsConfig& ph = cfg.physics;
    NumericsConfig& nu = cfg.numerics;
    AnalysisConfig& an = cfg.analysis;
    std::map<std::string, Handler> h{
        {"run.scenario", scenario(cfg.scenario)},
        {"run.name", text(cfg.name)},
        {"run.description", text(cfg.description)},
        {"run.base", scenario(cfg.base)},
        {"physics.mass", real(ph.mass)},
        {"physics.gamma0", real(ph.gamma[0])},
        {"physics.gamma1", real(ph.gamma[1])},
        {"physics.gamma2", real(ph.gamma[2])},
        {"physics.p0", real(ph.p0)},
        {"physics.sigma", real(ph.sigma)},
        {"physics.theta", real(ph.theta)},
        {"physics.width", real(ph.width)},
        {"physics.initial",
         choice(ph.initial, std::map<std::string, InitialKind>{
                                {"packet", InitialKind::packet},
                                {"gaussian", InitialKind::gaussian},
                                {"localized", InitialKind::localized}})},
        {"physics.chirality",
         choice(ph.chirality, std::map<std::string, Chirality>{{"symmetric", Chirality::symmetric},
                                                               {"left", Chirality::left},
                                                               {"right", Chirality::right}})},
        {"physics.kernel0", text(ph.kernel[0])},
        {"physics.kernel1", text(ph.kernel[1])},
        {"physics.kernel2", text(ph.kernel[2])},
        {"physics.noise_xi0", opt_real(ph.noise[0])},
        {"physics.noise_xi1", opt_real(ph.noise[1])},
        {"physics.noise_theta", opt_real(ph.noise[2])},
        {"physics.noise_chi", opt_real(ph.noise[3])},
        {"physics.noise_kind", text(ph.noise_kind)},
        {"numerics.dx", real(nu.dx)},
        {"numerics.dt", opt_real(nu.dt)},
        {"numerics.t_final", real(nu.t_final)},
        {"numerics.steps", integer(nu.steps)},
        {"numerics.n_sites", integer(nu.n_sites)},
        {"numerics.max_sites", integer(nu.max_sites)},
        {"numerics.half_width", real(nu.half_width)},
        {"numerics.eps",
         [this](const std::string& v, int line) {
           cfg.numerics.eps.clear();
           for (const auto& item : split(v, ',')) {
             if (auto d = to_double(item)) {
               cfg.numerics.eps.push_back(*d);
             } else {
               error(line, "bad eps entry '" + item + "'");
             }
           }
         }},
        {"numerics.n_traj", integer(nu.n_traj)},
        {"numerics.seed", integer(nu.seed)},
        {"numerics.alpha", real(nu.alpha)},
        {"numerics.samples", integer(nu.samples)},
        {"numerics.sampling", text(nu.sampling)},
        {"numerics.snapshots", integer(nu.snapshots)},
        {"numerics.solver",
         choice(nu.solver, std::map<std::string, PdeSolver>{{"full", PdeSolver::full},
                                                            {"moments", PdeSolver::moments},
                                                            {"diagonal", PdeSolver::diagonal}})},
        {"numerics.max_separation", integer(nu.max_separation)},
        {"numerics.window", integer(nu.window)},
        {"numerics.full_check", boolean(nu.full_check)},
        {"analysis.tol_prop", real(an.tol_prop)},
        {"analysis.tol_plateau", real(an.tol_plateau)},
        {"analysis.tail_start", opt_real(an.tail_start)},
        {"output.dir", text(cfg.output.dir)},
        {"output.csv", boolean(cfg.output.csv)},
        {"output.binary", boolean(cfg.output.binary)},
    };
    return h;
  }

  void parse_expectation(const std::string& metric, const std::string& v, int line) {
    Expectation e;
    e.metric = metric;
    e.text = v;
    const auto words = split(v, ' ');
    std::vector<std::string> w;
    for (const auto& s : words) {
      if (!s.empty()) w.push_back(s);
    }
    auto num = [&](const std::string& s) {
      auto d = to_double(s);
      if (!d) error(line, "expectation for '" + metric + "': bad number '" + s + "'");
      return d.value_or(0.0);
    };
    if (w.size() == 1 && (w[0] == "true" || w[0] == "false")) {
      e.kind = w[0] == "true" ? Expectation::Kind::is_true : Expectation::Kind::is_false;
    } else if (w.size() == 2 && (w[0] == "max" || w[0] == "min")) {
      e.kind = w[0] == "max" ? Expectation::Kind::max : Expectation::Kind::min;
      e.target = num(w[1]);
    } else if (w.size() == 3 && (w[1] == "rel" || w[1] == "abs")) {
      e.kind = w[1] == "rel" ? Expectation::Kind::rel : Expectation::Kind::abs;
      e.target = num(w[0]);
      e.tol = num(w[2]);
      if (e.tol < 0.0) error(line, "expectation for '" + metric + "': negative tolerance");
    } else {
      error(line, "expectation for '" + metric +
                      "' must be '<v> rel <tol>', '<v> abs <tol>', 'max <v>', 'min <v>', "
                      "'true' or 'false'");
      return;
    }
    cfg.expect.push_back(e);
  }

  void parse(const std::string& text) {
    cfg.source = text;
    auto h = handlers();
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto hash = raw.find('#');
      const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') {
          error(line, "malformed section header '" + s + "'");
          continue;
        }
        section = trim(s.substr(1, s.size() - 2));
        static const std::set<std::string> known{"run",      "physics", "numerics",
                                                 "analysis", "output",  "expect"};
        if (!known.count(section)) error(line, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        error(line, "expected 'key = value', got '" + s + "'");
        continue;
      }
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (section.empty()) {
        error(line, "key '" + key + "' outside any section");
        continue;
      }
      const std::string full = section + "." + key;
      if (seen.count(full)) error(line, "duplicate key '" + full + "'");
      seen.insert(full);
      if (section == "expect") {
        parse_expectation(key, value, line);
        continue;
      }
      auto it = h.find(full);
      if (it == h.end()) {
        error(line, "unknown key '" + key + "' in [" + section + "]");
        continue;
      }
      it->second(value, line);
    }
  }

  void require(const std::string& key, const std::string& why) {
    if (!has(key)) error(0, "missing required field '" + key + "' (" + why + ")");
  }

  void validate() {
    const ScenarioKind k = cfg.scenario;
    const std::string name = to_string(k);
    require("run.scenario", "every run");
    if (!has("run.scenario")) return;
    const PhysicsConfig& ph = cfg.physics;
    const NumericsConfig& nu = cfg.numerics;

    const char* gnames[3] = {"gamma0", "gamma1", "gamma2"};
    for (int l = 0; l < 3; ++l) {
      if (ph.gamma[l] < 0.0) error(0, std::string(gnames[l]) + ": rate must be non-negative");
    }
    const char* nnames[4] = {"noise_xi0", "noise_xi1", "noise_theta", "noise_chi"};
    for (int l = 0; l < 4; ++l) {
      if (ph.noise[l] && *ph.noise[l] < 0.0) {
        error(0, std::string(nnames[l]) + ": noise standard deviation must be non-negative");
      }
    }
    if (ph.noise_kind != "gaussian" && ph.noise_kind != "uniform" && ph.noise_kind != "two_point") {
      error(0, "noise_kind must be gaussian, uniform or two_point");
    }
    if (!(ph.width > 0.0)) error(0, "width must be positive");
    for (double e : nu.eps) {
      if (!(e > 0.0)) error(0, "eps entries must be positive");
    }
    if (nu.alpha < 0.0 || nu.alpha > 1.0) error(0, "alpha must lie in [0, 1]");
    if (nu.samples < 3) error(0, "samples must be at least 3");
    if (nu.sampling != "log" && nu.sampling != "linear") error(0, "sampling must be log or linear");
    if (nu.window < 2) error(0, "window must be at least 2");
    if (nu.t_final < 0.0) error(0, "t_final must be non-negative");
    for (const auto& kname : ph.kernel) {
      if (kname != "const" && kname.rfind("exp:", 0) != 0 && kname.rfind("gauss:", 0) != 0) {
        error(0, "kernel '" + kname + "' must be const, exp:<length> or gauss:<length>");
      }
    }

    const bool packet = ph.initial == InitialKind::packet;
    if (packet) {
      require("physics.p0", "packet initial state");
      require("physics.sigma", "packet initial state");
      if (has("physics.sigma") && !(ph.sigma > 0.0)) error(0, "sigma must be positive");
    }

    auto pde_checks = [&](const std::string& who) {
      require("numerics.dx", who);
      require("numerics.t_final", who);
      if (has("numerics.dx") && !(nu.dx > 0.0)) error(0, "dx must be positive");
      if (nu.dt && std::abs(*nu.dt - nu.dx) > 1e-12 * std::max(1.0, nu.dx)) {
        error(0, "dt must equal dx for PDE scenarios (exact characteristic advection)");
      }
      if (ph.initial == InitialKind::localized) {
        error(0, "localized initial states exist only on the lattice");
      }
    };
    auto lattice_checks = [&](const std::string& who, bool single_eps) {
      require("numerics.eps", who);
      require("numerics.t_final", who);
      if (single_eps && nu.eps.size() > 1) error(0, name + " takes a single eps value");
      if (ph.initial == InitialKind::packet) {
        error(0, "packet initial states are for PDE scenarios; use gaussian or localized");
      }
    };

    switch (k) {
      case ScenarioKind::walk:
        require("physics.theta", "walk");
        if (nu.steps < 1) error(0, "steps must be positive");
        break;
      case ScenarioKind::channel:
        lattice_checks("channel", true);
        break;
      case ScenarioKind::trajectories:
        lattice_checks("trajectories", true);
        require("numerics.n_traj", "trajectories");
        if (has("numerics.n_traj") && nu.n_traj < 2) error(0, "n_traj must be at least 2");
        break;
      case ScenarioKind::lindblad:
      case ScenarioKind::kernel_lindblad:
        pde_checks(name);
        if (nu.solver == PdeSolver::diagonal && ph.mass != 0.0) {
          error(0, "solver = diagonal requires mass = 0");
        }
        if (nu.solver == PdeSolver::diagonal && ph.gamma[0] != 0.0) {
          error(0, "solver = diagonal supports gamma1 and gamma2 only");
        }
        break;
      case ScenarioKind::telegraph:
        pde_checks(name);
        if (ph.mass != 0.0) error(0, "telegraph requires mass = 0");
        if (ph.gamma[0] != 0.0) error(0, "telegraph supports gamma1 and gamma2 only");
        break;
      case ScenarioKind::fourier:
        pde_checks(name);
        if (ph.gamma[0] != 0.0) error(0, "fourier supports gamma1 and gamma2 only");
        break;
      case ScenarioKind::dirac_free:
        require("numerics.dx", name);
        require("numerics.t_final", name);
        if (!packet) error(0, "dirac-free needs initial = packet");
        break;
      case ScenarioKind::compare:
        pde_checks(name);
        require("numerics.eps", name);
        if (cfg.base != ScenarioKind::channel && cfg.base != ScenarioKind::trajectories) {
          error(0, "compare base must be channel or trajectories");
        }
        if (cfg.base == ScenarioKind::trajectories && nu.n_traj < 2) {
          error(0, "n_traj must be at least 2");
        }
        break;
      case ScenarioKind::sweep:
        require("run.base", name);
        require("numerics.eps", name);
        if (cfg.base == ScenarioKind::sweep || cfg.base == ScenarioKind::compare ||
            cfg.base == ScenarioKind::walk) {
          error(0, "sweep base must be a lattice or PDE scenario");
        }
        break;
    }
  }
};

}  // namespace

std::string to_string(ScenarioKind k) { return scenario_names().at(k); }

std::optional<ScenarioKind> scenario_from_string(const std::string& s) {
  for (const auto& [k, name] : scenario_names()) {
    if (name == s) return k;
  }
  return std::nullopt;
}

bool is_pde_scenario(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::lindblad:
    case ScenarioKind::kernel_lindblad:
    case ScenarioKind::telegraph:
    case ScenarioKind::fourier:
    case ScenarioKind::dirac_free:
    case ScenarioKind::compare:
      return true;
    default:
      return false;
  }
}

bool Expectation::holds(double value) const {
  if (std::isnan(value)) return false;
  switch (kind) {
    case Kind::rel:
      return std::abs(value - target) <= tol * std::abs(target);
    case Kind::abs:
      return std::abs(value - target) <= tol;
    case Kind::max:
      return value <= target;
    case Kind::min:
      return value >= target;
    case Kind::is_true:
      return value != 0.0;
    case Kind::is_false:
      return value == 0.0;
  }
  return false;
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = "invalid configuration:";
  for (const auto& e : errors) msg += "\n  " + e;
  return msg;
}

}  // namespace

ConfigErrors::ConfigErrors(std::vector<std::string> errors)
    : ConfigError(join_errors(errors)), errors_(std::move(errors)) {}

ScenarioConfig parse_config(const std::string& text) {
  Parser p;
  p.parse(text);
  p.validate();
  if (!p.errors.empty()) throw ConfigErrors(p.errors);
  return p.cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  ScenarioConfig cfg = parse_config(buf.str());
  if (cfg.name.empty()) {
    auto slash = path.find_last_of('/');
    std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = stem.rfind('.');
    cfg.name = dot == std::string::npos ? stem : stem.substr(0, dot);
  }
  return cfg;
}

}  // namespace qrw
