#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "qrw/config.hpp"

using namespace qrw;

namespace {

std::vector<std::string> errors_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigErrors& e) {
    return e.errors();
  }
  return {};
}

bool mentions(const std::vector<std::string>& errs, const std::string& what) {
  return std::any_of(errs.begin(), errs.end(),
                     [&](const std::string& e) { return e.find(what) != std::string::npos; });
}

}  // namespace

TEST_CASE("minimal walk config gets defaults") {
  const ScenarioConfig c = parse_config("[run]\nscenario = walk\n[physics]\ntheta = 0.785\n");
  CHECK(c.scenario == ScenarioKind::walk);
  CHECK(c.physics.theta == 0.785);
  CHECK(c.numerics.steps == 100);
  CHECK(c.numerics.alpha == 0.5);
  CHECK(c.physics.gamma[2] == 0.0);
  CHECK(c.expect.empty());
}

TEST_CASE("negative rate is rejected") {
  const auto errs = errors_of(
      "[run]\nscenario = lindblad\n[physics]\ngamma2 = -1\n[numerics]\ndx = 0.1\nt_final = 1\n");
  REQUIRE(errs.size() == 1);
  CHECK(mentions(errs, "rate must be non-negative"));
}

TEST_CASE("all errors are reported together") {
  const std::string text =
      "[run]\n"
      "scenario = lindblad\n"
      "colour = blue\n"
      "[plotting]\n"
      "[physics]\n"
      "mass = 1\n"
      "mass = 2\n"
      "gamma2 = half\n"
      "[numerics]\n"
      "dx = 0.1\n"
      "dt = 0.05\n"
      "t_final = 1\n";
  const auto errs = errors_of(text);
  CHECK(errs.size() >= 5);
  CHECK(mentions(errs, "unknown key 'colour'"));
  CHECK(mentions(errs, "unknown section [plotting]"));
  CHECK(mentions(errs, "duplicate key 'physics.mass'"));
  CHECK(mentions(errs, "expected a number, got 'half'"));
  CHECK(mentions(errs, "dt must equal dx"));
  CHECK(mentions(errs, "line 3"));
}

TEST_CASE("scenario-specific requirements") {
  CHECK(mentions(errors_of("[physics]\nmass = 1\n"), "missing required field 'run.scenario'"));
  CHECK(mentions(errors_of("[run]\nscenario = warp\n"), "unknown scenario 'warp'"));
  const auto pkt = errors_of("[run]\nscenario = lindblad\n[physics]\ninitial = packet\n"
                             "[numerics]\ndx = 0.1\nt_final = 1\n");
  CHECK(mentions(pkt, "physics.p0"));
  CHECK(mentions(pkt, "physics.sigma"));
  CHECK(mentions(errors_of("[run]\nscenario = trajectories\n[numerics]\neps = 0.1\nt_final = 1\n"),
                 "numerics.n_traj"));
  CHECK(mentions(errors_of("[run]\nscenario = telegraph\n[physics]\nmass = 1\n"
                           "[numerics]\ndx = 0.1\nt_final = 1\n"),
                 "telegraph requires mass = 0"));
  CHECK(mentions(errors_of("[run]\nscenario = walk\n[physics]\ntheta = 1\n[numerics]\nsteps = 0\n"),
                 "steps must be positive"));
}

TEST_CASE("expectation forms") {
  const ScenarioConfig c = parse_config(
      "[run]\nscenario = walk\n[physics]\ntheta = 1\n[expect]\n"
      "a = 2 rel 0.1\nb = 0 abs 1e-3\nc = max 1e-6\nd = min 3\ne = true\nf = false\n");
  REQUIRE(c.expect.size() == 6);
  CHECK(c.expect[0].holds(2.15));
  CHECK_FALSE(c.expect[0].holds(2.3));
  CHECK(c.expect[1].holds(-9e-4));
  CHECK(c.expect[2].holds(1e-7));
  CHECK_FALSE(c.expect[2].holds(1e-5));
  CHECK(c.expect[3].holds(3.0));
  CHECK(c.expect[4].holds(1.0));
  CHECK_FALSE(c.expect[4].holds(0.0));
  CHECK(c.expect[5].holds(0.0));
  for (const auto& e : c.expect) CHECK_FALSE(e.holds(std::nan("")));
  CHECK(mentions(errors_of("[run]\nscenario = walk\n[physics]\ntheta = 1\n[expect]\na = about 2\n"),
                 "expectation for 'a'"));
}

TEST_CASE("every shipped preset parses") {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(QRW_PRESET_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path().string()));
    ++count;
  }
  CHECK(count >= 20);

  const ScenarioConfig f = load_config(std::string(QRW_PRESET_DIR) + "/fig1-left.cfg");
  CHECK(f.scenario == ScenarioKind::lindblad);
  CHECK(f.physics.gamma[2] == 0.05);
  CHECK(f.physics.p0 == 1.0);
  CHECK(f.physics.mass == 3.0);
  CHECK(f.physics.sigma == 0.1);
  CHECK(f.physics.initial == InitialKind::packet);
}

TEST_CASE("missing config file") {
  CHECK_THROWS_AS(load_config("/nonexistent/none.cfg"), ConfigError);
}
