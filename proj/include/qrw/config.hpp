#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qrw/types.hpp"

namespace qrw {

enum class ScenarioKind {
  walk,
  channel,
  trajectories,
  lindblad,
  kernel_lindblad,
  telegraph,
  fourier,
  dirac_free,
  compare,
  sweep
};

std::string to_string(ScenarioKind k);
std::optional<ScenarioKind> scenario_from_string(const std::string& s);
bool is_pde_scenario(ScenarioKind k);

enum class InitialKind { packet, gaussian, localized };
enum class Chirality { symmetric, left, right };
enum class PdeSolver { full, moments, diagonal };

// A declared tolerance from the [expect] section.
struct Expectation {
  enum class Kind { rel, abs, max, min, is_true, is_false };
  std::string metric;
  Kind kind = Kind::abs;
  double target = 0.0;
  double tol = 0.0;
  std::string text;  // as written
  bool holds(double value) const;
};

struct PhysicsConfig {
  double mass = 0.0;
  std::array<double, 3> gamma{};  // channels I, sigma3, sigma1
  double p0 = 0.0;
  double sigma = 0.0;
  double theta = 0.0;  // walk scenario, unscaled
  InitialKind initial = InitialKind::gaussian;
  double width = 1.0;
  Chirality chirality = Chirality::symmetric;
  std::array<std::string, 3> kernel{"const", "const", "const"};
  // Trajectory noise standard deviations (xi0, xi1, theta, chi); unset entries follow the rates.
  std::array<std::optional<double>, 4> noise{};
  std::string noise_kind = "gaussian";
};

struct NumericsConfig {
  double dx = 0.0;
  std::optional<double> dt;
  double t_final = 0.0;
  int steps = 100;   // walk scenario
  int n_sites = 0;   // 0 chooses from the light cone
  int max_sites = 512;
  double half_width = 0.0;  // 0 chooses from the light cone
  std::vector<double> eps;
  int n_traj = 0;
  std::uint64_t seed = 1;
  double alpha = 0.5;
  int samples = 100;
  std::string sampling = "log";  // log | linear
  int snapshots = 5;
  PdeSolver solver = PdeSolver::full;
  int max_separation = 0;
  int window = 7;
  bool full_check = true;  // fourier scenario
};

struct AnalysisConfig {
  double tol_prop = 0.02;
  double tol_plateau = 0.01;
  std::optional<double> tail_start;
};

struct OutputConfig {
  std::string dir;
  bool csv = true;
  bool binary = false;
};

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::walk;
  std::string name;
  std::string description;
  ScenarioKind base = ScenarioKind::channel;  // compare: lattice model; sweep: swept scenario
  PhysicsConfig physics;
  NumericsConfig numerics;
  AnalysisConfig analysis;
  OutputConfig output;
  std::vector<Expectation> expect;
  std::string source;  // original text
  double time_step() const { return numerics.dt.value_or(numerics.dx); }
};

// All problems found while parsing, not only the first.
class ConfigErrors : public ConfigError {
 public:
  explicit ConfigErrors(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

// Flat "[section]" headers, "key = value" assignments, '#' comments.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

}  // namespace qrw
