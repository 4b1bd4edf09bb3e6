#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "ablfield/cli.hpp"

int main(int argc, char** argv) {
  using namespace ablfield::cli;
  CLI::App app{"ABL beable fields on finite quantum models"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<Format> format;
  std::optional<unsigned> threads;
  bool timings = false;

  CLI::App* run_cmd = app.add_subcommand("run", "Run a scenario config");
  run_cmd->add_option("config", config, "Scenario config (JSON)")->required();
  run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_option("--out", out, "Output path prefix");
  const std::map<std::string, Format> formats{{"csv", Format::csv}, {"json", Format::json}};
  run_cmd->add_option("--format", format, "Output format")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
  run_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");
  run_cmd->add_flag("--timings", timings, "Record wall time per phase in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  RunOptions options;
  options.seed = seed;
  options.out = out;
  options.format = format;
  options.threads = threads;
  options.timings = timings;
  return run(config, options, std::cerr);
}
