#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "universim/experiments.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kInvariant = 3, kSizeCap = 4 };

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw universim::ConfigError("cannot open output file " + path);
  out << text;
  if (!out) throw universim::ConfigError("failed writing " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact-computation experiments for universal and non-universal distribution simulation"};
  std::string experiment, config_path, out_path;
  std::uint64_t samples = 0;
  std::optional<std::uint64_t> rng_seed;
  app.add_option("experiment", experiment,
                 "sawtooth_sweep | quantized_seed | type_decay | markov_decay | squeeze_sweep | clt_baseline")
      ->required();
  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--out", out_path, "CSV output path (default: output_path from the config, else stdout)");
  app.add_option("--samples", samples, "Monte Carlo samples per row for the output histogram (written to <out>.hist.csv)");
  app.add_option("--rng-seed", rng_seed, "overrides rng_seed from the config");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    const auto config = universim::load_config(config_path);
    if (universim::parse_experiment(experiment) != config.experiment)
      throw universim::ConfigError("experiment: command line asks for " + experiment + " but the config describes " +
                                   universim::to_string(config.experiment));
    if (out_path.empty()) out_path = config.output_path;
    if (samples && out_path.empty()) throw universim::ConfigError("--samples needs an output path for the histogram file");

    const auto result = universim::run_experiment(config, {samples, rng_seed});
    if (out_path.empty()) {
      std::cout << result.csv;
    } else {
      write_file(out_path, result.csv);
      if (samples) write_file(out_path + ".hist.csv", result.histogram_csv);
    }
    for (const auto& note : result.notes) std::cerr << note << "\n";
    if (!result.violations.empty()) {
      std::cerr << "invariant violated: " << result.violations.front() << "\n";
      if (result.violations.size() > 1) std::cerr << "(" << result.violations.size() - 1 << " more)\n";
      return kInvariant;
    }
    return kOk;
  } catch (const universim::SizeError& e) {
    std::cerr << "size cap: " << e.what() << "\n";
    return kSizeCap;
  } catch (const universim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const universim::PreconditionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const universim::DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const universim::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
