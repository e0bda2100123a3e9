// reltime: run relational-time scenarios and emit CSV tables.
//
// Exit codes: 0 success, 2 parse/validation/usage failure, 3 numerical
// failure. Errors go to stderr prefixed with `ERR_<CODE>:`.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "reltime/reltime.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

int fail(reltime::ErrorCode code, const std::string& message) {
  // one prefixed line per diagnostic
  std::istringstream lines(message);
  for (std::string line; std::getline(lines, line);) {
    std::cerr << "ERR_" << reltime::code_name(code) << ": " << line << "\n";
  }
  return reltime::is_numerical(code) ? kExitNumerical : kExitInput;
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw reltime::Error(reltime::ErrorCode::IoError, "cannot write " + out_path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relational-time quantum evolution: decoherence sweeps, clock recovery, collapse comparison"};
  app.require_subcommand(1);
  app.fallthrough();

  std::size_t nodes = reltime::kDefaultNodes;
  double threshold = reltime::kCompleteDecoherenceThreshold;
  std::uint64_t seed = 0;
  app.add_option("--nodes", nodes, "Gauss-Hermite nodes for quadrature engines")->check(CLI::PositiveNumber);
  app.add_option("--threshold", threshold, "complete-decoherence cutoff on off-diagonal magnitude")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "seed for randomized presets");

  std::string file;
  std::string out_path;
  bool emit = false;

  auto* validate = app.add_subcommand("validate", "parse and validate a scenario");
  validate->add_option("file", file)->required();
  validate->add_flag("--emit", emit, "print the canonical form");

  auto add_run = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("file", file)->required();
    sub->add_option("--out", out_path, "CSV output path (default stdout)");
    return sub;
  };
  auto* sweep = add_run("sweep", "decoherence sweep over t_B or lambda");
  auto* clock = add_run("clock-recovery", "conditional readout through the internal clock");
  auto* pearle = add_run("pearle-compare", "collapse-model state against the relational Gaussian state");
  auto* report = add_run("report", "energy-basis coherence report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERR_USAGE: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    const reltime::ScenarioFile scenario = reltime::load_scenario(file);
    const reltime::ResolvedScenario resolved = reltime::resolve(scenario, seed);
    const reltime::RunOptions options{nodes, threshold};

    if (validate->parsed()) {
      std::cout << (emit ? reltime::emit_scenario(scenario) : "ok: " + file + "\n");
      return 0;
    }
    reltime::ResultTable table({});
    if (sweep->parsed()) {
      table = reltime::run_decoherence_sweep(resolved, options);
    } else if (clock->parsed()) {
      table = reltime::run_clock_recovery(resolved, options);
    } else if (pearle->parsed()) {
      table = reltime::run_pearle_compare(resolved, options);
    } else if (report->parsed()) {
      table = reltime::run_report(resolved, options);
    }
    write_output(table.to_csv(), out_path);
  } catch (const reltime::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    std::cerr << "ERR_INTERNAL: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
