#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "ablfield/cli.hpp"

using namespace ablfield;
using namespace ablfield::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ablfield_unit_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

json toy(const std::string& kind) {
  json j = json::parse(R"({
    "schema": 1, "kind": "toy1", "seed": 42,
    "parameters": {"x1": -1, "x2": 1, "sigma1": 0.05, "sigma2": 0.05,
                   "amp_a": 0.5477225575051661, "amp_b": [0, 0.8366600265340756],
                   "mass": 2, "t1": 1},
    "grid": {"t_min": -2, "t_max": 4, "t_steps": 31, "x_min": -2, "x_max": 2, "x_steps": 201}
  })");
  j["kind"] = kind;
  return j;
}

json classes() {
  return json::parse(R"({
    "schema": 1, "kind": "nonrel-classes", "seed": 5,
    "parameters": {"sites": 4, "contact": 2, "t_final": 1.5,
                   "particles": [{"mass": 1, "statistics": "boson", "class": "B"},
                                 {"mass": 3, "statistics": "fermion", "class": "F"}],
                   "initial": [{"positions": [0, 3]}], "final_positions": [2]},
    "grid": {"t_steps": 6}
  })");
}

std::string validation_message(const json& j) {
  try {
    parse_config(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing is strict and reports field paths") {
  CHECK_NOTHROW(parse_config(toy("toy1")));
  CHECK_NOTHROW(parse_config(classes()));

  json j = toy("toy1");
  j["parameters"]["colour"] = 1;
  CHECK(validation_message(j).find("parameters.colour") != std::string::npos);

  j = toy("toy1");
  j.erase("schema");
  CHECK(validation_message(j).find("schema") != std::string::npos);

  j = toy("toy1");
  j["schema"] = 2;
  CHECK(validation_message(j).find("schema") != std::string::npos);

  j = toy("toy1");
  j["kind"] = "toy3";
  CHECK(validation_message(j).find("kind") != std::string::npos);

  j = toy("toy1");
  j["parameters"]["amp_a"] = std::sqrt(0.3);
  j["parameters"]["amp_b"] = std::sqrt(0.6);
  CHECK(validation_message(j).find("amp") != std::string::npos);

  j = toy("toy1");
  j["grid"]["x_steps"] = "many";
  CHECK(validation_message(j).find("grid.x_steps") != std::string::npos);

  j = classes();
  j["parameters"]["particles"][1]["statistics"] = "anyon";
  CHECK(validation_message(j).find("parameters.particles[1].statistics") != std::string::npos);

  j = classes();
  j["parameters"]["initial"][0]["positions"] = json::array({0, 9});
  CHECK(validation_message(j).find("parameters.initial[0].positions") != std::string::npos);

  j = json{{"schema", 1}, {"kind", "abl-check"}, {"grid", {{"t_steps", 2}}}};
  CHECK(validation_message(j).find("grid") != std::string::npos);
}

TEST_CASE("exit code taxonomy") {
  CHECK(exit_code_for(ErrorKind::validation) == 2);
  CHECK(exit_code_for(ErrorKind::capacity) == 2);
  CHECK(exit_code_for(ErrorKind::contract) == 2);
  CHECK(exit_code_for(ErrorKind::impossible_post_selection) == 3);
  CHECK(exit_code_for(ErrorKind::invariant) == 4);
  CHECK(exit_code_for(ErrorKind::zero_probability_branch) == 4);
  CHECK(exit_code_for(ErrorKind::io) == 5);
}

TEST_CASE("emit_field csv and json") {
  const fs::path dir = scratch("emit");
  BeableField f;
  f.grid = GridSpec{0.0, 1.0, 2, 0.0, 1.0, 2};
  f.values = {0.0, 0.0, 0.0, 0.0};
  emit_field(f, Format::csv, (dir / "z.csv").string());
  const std::string csv = slurp(dir / "z.csv");
  CHECK(csv == "t,x,rho\n0,0,0\n0,1,0\n1,0,0\n1,1,0\n");

  f.grid = GridSpec{-0.3, 0.7, 3, 0.1, 2.2, 4};
  f.values.clear();
  for (int i = 0; i < 12; ++i) f.values.push_back(std::exp(0.37 * i) / 3.0 - 1e-300 * i);
  for (Format fmt : {Format::csv, Format::json}) {
    const std::string p = (dir / ("f." + to_string(fmt))).string();
    emit_field(f, fmt, p);
    const BeableField back = read_field(p, fmt);
    CHECK(back.values == f.values);
    CHECK(back.grid.t_steps == 3);
    CHECK(back.grid.x_steps == 4);
    CHECK(back.grid.x_max == f.grid.x_at(3));
  }
  CHECK_THROWS_AS(emit_field(f, Format::csv, (dir / "missing" / "f.csv").string()), IoError);
}

TEST_CASE("run: toy output is deterministic per seed") {
  const fs::path dir = scratch("toy");
  const fs::path cfg = write_config(dir, toy("toy1"));
  std::ostringstream err;
  RunOptions a;
  a.out = (dir / "a").string();
  a.threads = 1;
  REQUIRE(run(cfg.string(), a, err) == 0);
  std::vector<std::string> first;
  const std::vector<std::string> stems{".field.csv", ".rays.csv", ".report.json"};
  for (const std::string& stem : stems) first.push_back(slurp(dir / ("a" + stem)));
  a.threads = 3;
  REQUIRE(run(cfg.string(), a, err) == 0);
  CHECK(err.str().empty());
  for (std::size_t i = 0; i < stems.size(); ++i) {
    CHECK(slurp(dir / ("a" + stems[i])) == first[i]);
  }
  const json report = json::parse(slurp(dir / "a.report.json"));
  CHECK(report["status"] == "ok");
  CHECK(report["seed"] == 42);
  CHECK(!report.contains("timings"));
  for (const auto& c : report["checks"]) {
    CHECK(c.contains("residual"));
    CHECK(c.contains("tolerance"));
  }

  RunOptions other = a;
  other.out = (dir / "c").string();
  other.seed = 43;
  other.format = Format::json;
  other.timings = true;
  REQUIRE(run(cfg.string(), other, err) == 0);
  const json r2 = json::parse(slurp(dir / "c.report.json"));
  CHECK(r2["seed"] == 43);
  CHECK(r2.contains("timings"));
  CHECK(fs::exists(dir / "c.field.json"));
  CHECK(fs::exists(dir / "c.rays.json"));
}

TEST_CASE("run: error exit codes") {
  const fs::path dir = scratch("errors");
  std::ostringstream err;
  RunOptions o;
  o.out = (dir / "out").string();

  json j = toy("toy2");
  j["parameters"]["amp_a"] = std::sqrt(0.3);
  j["parameters"]["amp_b"] = std::sqrt(0.6);
  CHECK(run(write_config(dir, j).string(), o, err) == 2);
  const json line = json::parse(err.str());
  CHECK(line["exit_code"] == 2);
  CHECK(line["error"] == "validation");
  CHECK(line["message"].get<std::string>().find("amp") != std::string::npos);

  err.str("");
  j = classes();
  j["parameters"]["t_final"] = 0.0;
  CHECK(run(write_config(dir, j).string(), o, err) == 3);
  CHECK(json::parse(err.str())["error"] == "impossible-post-selection");

  err.str("");
  CHECK(run((dir / "absent.json").string(), o, err) == 5);

  err.str("");
  std::ofstream(dir / "broken.json") << "{ schema: ";
  CHECK(run((dir / "broken.json").string(), o, err) == 2);

  err.str("");
  RunOptions nowhere;
  nowhere.out = (dir / "no" / "such" / "dir").string();
  CHECK(run(write_config(dir, toy("toy1")).string(), nowhere, err) == 5);
}

TEST_CASE("run: lattice and abl-check kinds") {
  const fs::path dir = scratch("lattice");
  std::ostringstream err;
  RunOptions o;
  o.out = (dir / "classes").string();
  REQUIRE(run(write_config(dir, classes()).string(), o, err) == 0);
  json report = json::parse(slurp(dir / "classes.report.json"));
  CHECK(report["result"]["final_configuration"] == json::array({2}));
  CHECK(report["result"]["max_deviation_from_born"].get<double>() > 1e-3);

  json j = {{"schema", 1},
            {"kind", "abl-check"},
            {"seed", 9},
            {"parameters", {{"scenarios", 20}, {"max_dim", 8}}}};
  o.out = (dir / "abl").string();
  REQUIRE(run(write_config(dir, j).string(), o, err) == 0);
  report = json::parse(slurp(dir / "abl.report.json"));
  CHECK(report["checks"][0]["residual"].get<double>() <= 1e-10);

  j = json::parse(R"({
    "schema": 1, "kind": "nonrel-nparticle", "seed": 1,
    "parameters": {"sites": 6, "t_final": 1.0, "engineered": true,
                   "particles": [{"mass": 1}, {"mass": 1}, {"mass": 2}]},
    "grid": {"t_steps": 4}
  })");
  o.out = (dir / "cat").string();
  REQUIRE(run(write_config(dir, j).string(), o, err) == 0);
  report = json::parse(slurp(dir / "cat.report.json"));
  for (const auto& c : report["checks"]) CHECK(c["pass"] == true);
  CHECK(err.str().empty());
}

TEST_CASE("thread override from the environment") {
  ::setenv("ABLFIELD_THREADS", "3", 1);
  CHECK(threads_from_environment() == 3u);
  ::setenv("ABLFIELD_THREADS", "three", 1);
  CHECK_THROWS_AS(threads_from_environment(), ValidationError);
  ::unsetenv("ABLFIELD_THREADS");
  CHECK(!threads_from_environment());
}
