#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qrw/config.hpp"
#include "qrw/scenarios.hpp"

namespace fs = std::filesystem;

namespace {

fs::path resolve(const std::string& out, const qrw::ScenarioConfig& cfg) {
  if (!out.empty()) return out;
  fs::path dir = cfg.output.dir.empty() ? fs::path(cfg.name) : fs::path(cfg.output.dir);
  return dir.is_relative() ? qrw::output_root() / dir : dir;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size() || !(v > 0.0)) throw qrw::ConfigError("bad eps entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw qrw::ConfigError("--eps needs at least one value");
  return out;
}

void emit_plots(const qrw::RunReport& r) {
  for (const char* kind : {"density", "mean", "eta"}) {
    try {
      std::cout << "plot script: " << qrw::emit_plot_script(r, kind).string() << "\n";
    } catch (const std::exception&) {
      // Not every scenario produces every kind of series.
    }
  }
}

int finish(const qrw::RunReport& r, bool plots) {
  std::cout << qrw::format_report(r);
  std::cout << "output: " << r.dir.string() << "\n";
  if (plots) emit_plots(r);
  return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoherent quantum walk and Dirac-Lindblad simulator"};
  app.require_subcommand(1);

  std::string config, out, eps, cfg_a, cfg_b, dir;
  bool plots = false;
  double tol = -1.0;

  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("config", config, "Scenario config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory");
  run->add_flag("--plot", plots, "Also write gnuplot scripts");

  auto* sweep = app.add_subcommand("sweep", "Run a scenario over several eps (or dx) values");
  sweep->add_option("config", config, "Scenario config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--eps", eps, "Comma-separated values, e.g. 0.1,0.05,0.025")->required();
  sweep->add_option("--out", out, "Output directory");

  auto* compare = app.add_subcommand("compare", "Run two configs and compare final densities");
  compare->add_option("config_a", cfg_a)->required()->check(CLI::ExistingFile);
  compare->add_option("config_b", cfg_b)->required()->check(CLI::ExistingFile);
  compare->add_option("--tol", tol, "Fail when the L1 distance exceeds this");
  compare->add_option("--out", out, "Output directory");

  auto* report = app.add_subcommand("report", "Summarize an existing run directory");
  report->add_option("dir", dir)->required()->check(CLI::ExistingDirectory);
  report->add_flag("--plot", plots, "Also write gnuplot scripts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const qrw::ScenarioConfig cfg = qrw::load_config(config);
      return finish(qrw::run(cfg, resolve(out, cfg)), plots);
    }
    if (*sweep) {
      const qrw::ScenarioConfig cfg = qrw::load_config(config);
      return finish(qrw::run_sweep(cfg, parse_list(eps), resolve(out, cfg)), false);
    }
    if (*compare) {
      const qrw::ScenarioConfig a = qrw::load_config(cfg_a);
      const qrw::ScenarioConfig b = qrw::load_config(cfg_b);
      const fs::path root = out.empty() ? qrw::output_root() / ("compare_" + a.name + "_" + b.name)
                                        : fs::path(out);
      const qrw::RunReport ra = qrw::run(a, root / "a");
      const qrw::RunReport rb = qrw::run(b, root / "b");
      if (ra.final_density.x.empty() || rb.final_density.x.empty()) {
        std::cerr << "error: both scenarios must produce a final density\n";
        return 2;
      }
      const double l1 = qrw::density_l1(ra.final_density, rb.final_density);
      std::printf("a: %s (%s)\nb: %s (%s)\nl1_final_density = %.10g\n", a.name.c_str(),
                  ra.passed() ? "pass" : "fail", b.name.c_str(), rb.passed() ? "pass" : "fail", l1);
      const bool ok = ra.passed() && rb.passed() && (tol < 0.0 || l1 <= tol);
      if (tol >= 0.0) std::printf("tolerance %.3g: %s\n", tol, l1 <= tol ? "pass" : "FAIL");
      return ok ? 0 : 1;
    }
    if (*report) {
      return finish(qrw::read_report(dir), plots);
    }
  } catch (const qrw::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const qrw::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
