#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "qrw/config.hpp"

namespace qrw {

struct CheckResult {
  std::string metric;
  std::string rule;
  double value = 0.0;
  bool pass = false;
};

// Final position density for cross-run comparisons, tabulated at sample points.
struct DensityProfile {
  std::vector<double> x;
  std::vector<double> density;
};

struct RunReport {
  std::string name;
  std::string scenario;
  std::string config_echo;
  std::filesystem::path dir;
  std::vector<std::pair<std::string, std::string>> files;  // (role, file name in dir)
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<CheckResult> checks;
  std::vector<std::string> notes;
  DensityProfile final_density;

  void set(const std::string& metric, double value);
  const double* find(const std::string& metric) const;
  double get(const std::string& metric) const;
  void add_file(const std::string& role, const std::string& name);
  bool passed() const;
};

// Root for relative output directories: $QRW_OUTPUT_ROOT, else "qrw-out".
std::filesystem::path output_root();

// Runs the scenario, writes CSVs and report files under `dir`, evaluates expectations.
RunReport run(const ScenarioConfig& cfg, const std::filesystem::path& dir);
// Output directory from the config and the output root.
RunReport run(const ScenarioConfig& cfg);

// Runs `cfg` as a sweep over `eps` (lattice spacing or PDE dx), one job per value.
RunReport run_sweep(const ScenarioConfig& cfg, const std::vector<double>& eps,
                    const std::filesystem::path& dir);

// L1 distance of the final densities, B interpolated onto A's sample points.
double density_l1(const DensityProfile& a, const DensityProfile& b);

// report.kv (machine), report.txt (human).
void write_report(const RunReport& r);
RunReport read_report(const std::filesystem::path& dir);
std::string format_report(const RunReport& r);

// kind: density | mean | eta. Returns the script path.
std::filesystem::path emit_plot_script(const RunReport& r, const std::string& kind);

}  // namespace qrw
