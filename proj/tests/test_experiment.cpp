#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sadi/experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace sadi;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json sgd_doc(std::int64_t N = 10000) {
  json doc = json::parse(R"({
    "name": "sgd_small",
    "problem": {"kind": "sgd", "function": "abs", "x0": [1.0]},
    "schedule": {"kind": "power", "a": 1.0, "rho": 0.6},
    "noise": {"kind": "gaussian", "sigma": 0.5},
    "guard_R": 100,
    "seeds": [1, 2],
    "checkpoint_base": 1000
  })");
  doc["N"] = N;
  return doc;
}

fs::path scratch(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("sadi_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool has(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

int cli(const std::string& args) {
  const char* exe = std::getenv("SADI_CLI");
  REQUIRE(exe != nullptr);
  const int rc = std::system((std::string(exe) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_json(const fs::path& dir, const std::string& name, const json& doc) {
  const fs::path p = dir / name;
  std::ofstream(p) << doc.dump(2);
  return p;
}

}  // namespace

TEST_CASE("validate_config examples") {
  CHECK(validate_config(sgd_doc()).empty());

  json bad = sgd_doc();
  bad["schedule"]["rho"] = 1.5;
  CHECK(has(validate_config(bad), "sum of steps converges"));

  json shb = json::parse(R"({
    "problem": {"kind": "shb", "function": "half_squared_norm", "dimension": 2,
                "beta_schedule": {"kind": "power", "a": 0.5, "rho": 0.5}},
    "schedule": {"kind": "power", "a": 0.5, "rho": 0.7},
    "N": 1000, "checkpoint_base": 100
  })");
  CHECK(has(validate_config(shb), "no positive c"));
  shb["schedule"]["rho"] = 0.5;
  CHECK(validate_config(shb).empty());
}

TEST_CASE("validate_config structural checks") {
  json d = sgd_doc();
  d["seeds"] = json::array();
  CHECK_FALSE(validate_config(d).empty());
  d = sgd_doc();
  d["checkpoint_base"] = 100000;
  CHECK_FALSE(validate_config(d).empty());
  d = sgd_doc();
  d["schedule"] = {{"kind", "constant"}, {"a", 0.1}};
  CHECK(has(validate_config(d), "do not vanish"));
  d["allow_nonconforming"] = true;
  CHECK(validate_config(d).empty());
  d = sgd_doc();
  d["noise"] = {{"kind", "student_t"}, {"df", 1.5}, {"scale", 1.0}, {"q", 2.0}};
  CHECK(has(validate_config(d), "noise"));
  d = sgd_doc();
  d["problem"]["function"] = "cosh";
  CHECK_FALSE(validate_config(d).empty());
  CHECK_THROWS_AS((void)parse_config(d), ConfigError);
  CHECK_THROWS_AS((void)parse_config(json::parse(R"({"N": 5})")), ConfigError);
}

TEST_CASE("checkpoint schedule") {
  CHECK(checkpoint_schedule(1000, 10000) == std::vector<std::int64_t>{1000, 2000, 4000, 8000, 10000});
  CHECK(checkpoint_schedule(1000, 8000) == std::vector<std::int64_t>{1000, 2000, 4000, 8000});
}

TEST_CASE("file-count contract and determinism") {
  const auto dir = scratch("files");
  const auto cfg = parse_config(sgd_doc());
  RunRequest req;
  req.output_dir = dir / "a";
  req.jobs = 2;
  const auto report = run_experiment(cfg, req);
  CHECK(report.runs.size() == 2);
  CHECK(report.bounded_fraction() == 1.0);
  for (const char* seed : {"1", "2"}) {
    const fs::path sd = dir / "a" / "sgd_small" / seed;
    CHECK(fs::exists(sd / "trajectory.csv"));
    CHECK(fs::exists(sd / "summary.json"));
    int checkpoints = 0;
    for (const auto& e : fs::directory_iterator(sd))
      if (e.path().extension() == ".csv" && e.path().stem().string().rfind("checkpoint_", 0) == 0) ++checkpoints;
    CHECK(checkpoints >= 2);
  }
  CHECK(fs::exists(dir / "a" / "sgd_small" / "manifest.json"));

  req.output_dir = dir / "b";
  req.jobs = 1;
  (void)run_experiment(cfg, req);
  for (const char* seed : {"1", "2"}) {
    CHECK(slurp(dir / "a" / "sgd_small" / seed / "summary.json") == slurp(dir / "b" / "sgd_small" / seed / "summary.json"));
    CHECK(slurp(dir / "a" / "sgd_small" / seed / "trajectory.csv") == slurp(dir / "b" / "sgd_small" / seed / "trajectory.csv"));
  }
  CHECK(slurp(dir / "a" / "sgd_small" / "manifest.json").size() > 0);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = scratch("roundtrip");
  const auto cfg = parse_config(sgd_doc(8000));
  RunRequest req;
  req.output_dir = dir;
  req.seeds = std::vector<std::uint64_t>{5};
  const auto report = run_experiment(cfg, req);
  const auto& run = report.runs.at(0);
  REQUIRE_FALSE(run.checkpoints.empty());
  for (const auto& cp : run.checkpoints) {
    const fs::path csv = dir / "sgd_small" / "5" / ("checkpoint_" + std::to_string(cp.iteration) + ".csv");
    const auto again = diagnose_checkpoint(csv);
    CHECK(again.total_weight == doctest::Approx(cp.total_weight).epsilon(1e-12));
    REQUIRE(again.closed_residuals.size() == cp.closed_residuals.size());
    for (const auto& [name, value] : cp.closed_residuals)
      CHECK(std::abs(again.closed_residuals.at(name) - value) <= 1e-12 * (1.0 + std::abs(value)));
    for (const auto& [name, stat] : cp.oscillation)
      CHECK((again.oscillation.at(name).average - stat.average).norm() <= 1e-12);
    CHECK(std::abs(*again.velocity_moment - *cp.velocity_moment) <= 1e-12 * *cp.velocity_moment);
    CHECK(again.residence == cp.residence);
    if (cp.centroid_gap) CHECK(std::abs(*again.centroid_gap - *cp.centroid_gap) <= 1e-12);
    if (cp.circulation) CHECK(std::abs(*again.circulation - *cp.circulation) <= 1e-12);

    const auto loaded = read_checkpoint(csv);
    CHECK(loaded.measure.size() == static_cast<std::size_t>(cp.iteration));
    CHECK(loaded.sidecar.at("iteration").get<std::int64_t>() == cp.iteration);
    CHECK(loaded.sidecar.at("seed").get<std::uint64_t>() == 5);
  }
  CHECK_THROWS_AS((void)read_checkpoint(dir / "missing.csv"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("sandwich holds in reported trajectory checks") {
  const auto cfg = parse_config(sgd_doc(20000));
  const auto run = run_single(cfg, 3);
  REQUIRE(run.trajectory_checks.is_array());
  for (const auto& cp : run.trajectory_checks) CHECK(cp.at("sandwich_holds").get<bool>());
}

TEST_CASE("fictitious play summary reports the Nash distance") {
  const auto cfg = parse_config(json::parse(R"({
    "name": "fp",
    "problem": {"kind": "fictitious_play", "game": "matching_pennies", "xi0": [[1, 0], [1, 0]]},
    "N": 100000, "seeds": [1], "checkpoint_base": 10000
  })"));
  const auto run = run_single(cfg, 1);
  REQUIRE(run.nash_distance_inf.has_value());
  const double direct = (run.final_state - Vector::Constant(4, 0.5)).cwiseAbs().maxCoeff();
  CHECK(*run.nash_distance_inf == direct);
  CHECK(run.to_json().contains("nash_distance_inf"));
}

TEST_CASE("other problem kinds run") {
  const auto shb = parse_config(json::parse(R"({
    "problem": {"kind": "shb", "function": "l1", "dimension": 2, "q0": [1, -1], "c": 1,
                "beta_schedule": {"kind": "power", "a": 0.5, "rho": 0.6}},
    "schedule": {"kind": "power", "a": 0.5, "rho": 0.6},
    "noise": {"kind": "uniform_ball", "radius": 0.5},
    "N": 4000, "checkpoint_base": 1000
  })"));
  const auto r1 = run_single(shb, 2);
  CHECK(r1.final_state.size() == 4);
  CHECK_FALSE(r1.checkpoints.empty());

  const auto custom = parse_config(json::parse(R"({
    "problem": {"kind": "custom_map", "map": "rotation", "x0": [1, 0]},
    "schedule": {"kind": "power", "a": 0.5, "rho": 0.8},
    "delta": {"d": 0.1, "sigma": 0.5},
    "N": 4000, "checkpoint_base": 1000
  })"));
  const auto r2 = run_single(custom, 2);
  CHECK(r2.steps == 4000);
}

TEST_CASE("command line interface") {
  const auto dir = scratch("cli");
  const auto good = write_json(dir, "good.json", sgd_doc(4000));
  json bad = sgd_doc();
  bad["schedule"]["rho"] = 1.5;
  const auto violating = write_json(dir, "bad.json", bad);
  std::ofstream(dir / "broken.json") << "{ not json";

  CHECK(cli("validate " + good.string()) == 0);
  CHECK(cli("validate " + violating.string()) == 1);
  CHECK(cli("validate " + (dir / "broken.json").string()) == 1);
  CHECK(cli("validate " + (dir / "absent.json").string()) == 3);

  CHECK(cli("run " + good.string() + " --out " + (dir / "out").string() + " --seeds 3,4 --jobs 2") == 0);
  CHECK(fs::exists(dir / "out" / "sgd_small" / "3" / "summary.json"));
  CHECK(fs::exists(dir / "out" / "sgd_small" / "4" / "trajectory.csv"));
  CHECK_FALSE(fs::exists(dir / "out" / "sgd_small" / "1"));
  CHECK(cli("run " + violating.string() + " --out " + (dir / "out2").string()) == 1);

  CHECK(cli("diagnose " + (dir / "out" / "sgd_small" / "3" / "checkpoint_4000.csv").string()) == 0);
  CHECK(cli("diagnose " + (dir / "nothing.csv").string()) == 3);

  // Output path blocked by a regular file.
  std::ofstream(dir / "blocked") << "x";
  CHECK(cli("run " + good.string() + " --out " + (dir / "blocked").string()) == 3);

  // Escape with strict boundedness.
  json esc = json::parse(R"({
    "name": "blowup",
    "problem": {"kind": "custom_map", "map": "linear_contraction", "x0": [1.0]},
    "schedule": {"kind": "power", "a": 1.0, "rho": 0.6},
    "noise": {"kind": "gaussian", "sigma": 50.0},
    "guard_R": 2.0, "N": 2000, "checkpoint_base": 1000, "seeds": [1]
  })");
  esc["strict_boundedness"] = true;
  const auto strict = write_json(dir, "strict.json", esc);
  CHECK(cli("run " + strict.string() + " --out " + (dir / "out3").string()) == 2);
  esc["strict_boundedness"] = false;
  const auto lax = write_json(dir, "lax.json", esc);
  CHECK(cli("run " + lax.string() + " --out " + (dir / "out4").string()) == 0);
  fs::remove_all(dir);
}
