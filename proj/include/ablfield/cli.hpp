#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ablfield/error.hpp"
#include "ablfield/field.hpp"
#include "ablfield/nonrel.hpp"
#include "ablfield/relmodels.hpp"

namespace ablfield::cli {

enum class Kind { abl_check, nonrel_nparticle, nonrel_classes, toy1, toy2 };
enum class Format { csv, json };

std::string to_string(Kind k);
std::string to_string(Format f);

struct OutputSpec {
  std::string prefix = "ablfield";
  Format format = Format::csv;
};

struct AblCheckParams {
  std::size_t scenarios = 100;
  std::size_t min_dim = 2;
  std::size_t max_dim = 16;
  double max_time = 3.0;
  double tolerance = 1e-10;
};

struct InitialTerm {
  Complex amplitude{1.0, 0.0};
  std::vector<std::size_t> positions;
};

struct LatticeParams {
  std::size_t sites = 0;
  double spacing = 1.0;
  double hopping = 1.0;
  double contact = 0.0;
  bool periodic = false;
  double t_final = 1.0;
  std::size_t t_steps = 2;
  std::vector<nonrel::ParticleSpec> particles;
  std::vector<InitialTerm> initial;
  /// nparticle only: label-symmetric packets with an occupation final condition.
  bool engineered = false;
  /// classes only: the class whose mass field is computed; the other class is post-selected.
  nonrel::ParticleClass measured_class = nonrel::ParticleClass::B;
  std::optional<std::vector<std::size_t>> final_positions;
};

struct ScenarioConfig {
  Kind kind = Kind::abl_check;
  std::uint64_t seed = 0;
  OutputSpec output;
  nlohmann::json source;
  std::variant<AblCheckParams, LatticeParams, rel::ToyModelConfig> parameters;
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise ValidationError with
/// the offending field path.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<Format> format;
  std::optional<unsigned> threads;
  bool timings = false;
};

struct RunResult {
  int exit_code = 0;
  nlohmann::json report;
  std::vector<std::string> files;
};

int exit_code_for(ErrorKind kind);

/// Executes the scenario, writes its artifacts and the report. Errors propagate as exceptions.
RunResult run_scenario(ScenarioConfig cfg, const RunOptions& options);

/// Full command: load, run, report. Errors are rendered as one JSON line on `err`.
int run(const std::string& config_path, const RunOptions& options, std::ostream& err);

/// Thread count from ABLFIELD_THREADS, if set.
std::optional<unsigned> threads_from_environment();

std::string format_double(double v);

void emit_field(const BeableField& field, Format format, const std::string& path);
BeableField read_field(const std::string& path, Format format);
void emit_rays(const std::vector<rel::RayPath>& rays, Format format, const std::string& path);

}  // namespace ablfield::cli
