// twophase: scenario-driven front end.
//
//   twophase <simulate|spectrum|criteria|report|sweep> <scenario> [--out DIR]
//            [--vary KEY a:b:step] [--n N] [--dt DT]
//
// Exit status: 0 success, 2 configuration error, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "twophase/error.hpp"
#include "twophase/report.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Options {
  std::string scenario;
  std::optional<std::string> out;
  std::optional<int> n;
  std::optional<double> dt;
  std::vector<std::string> vary;
};

twophase::Overrides overrides(const Options& o) {
  twophase::Overrides ov;
  if (o.n) ov["domain.n"] = *o.n;
  if (o.dt) ov["run.dt"] = *o.dt;
  return ov;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw twophase::ConfigError("cannot read scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_stages(const Options& o, unsigned stages, const char* report_name) {
  namespace fs = std::filesystem;
  const twophase::Scenario sc = twophase::parse_scenario(o.scenario, overrides(o));
  const fs::path dir = o.out ? fs::path(*o.out) : fs::path(sc.outputs.directory);

  twophase::RunReport partial;
  try {
    const auto rep = twophase::run_scenario(sc, stages, dir, &partial);
    if (report_name) {
      twophase::write_atomic(dir / report_name, twophase::report_json(rep));
      std::cout << (dir / report_name).string() << '\n';
    }
    for (const auto& f : rep.files) std::cout << (dir / f).string() << '\n';
    return 0;
  } catch (const twophase::NumericalError& e) {
    const char* name = report_name ? report_name : "simulate.json";
    twophase::write_atomic(dir / name, twophase::report_json(partial));
    std::cerr << "twophase: numerical failure: " << e.what() << "\n"
              << "twophase: partial report written to " << (dir / name).string() << '\n';
    return kNumericalError;
  }
}

int run_sweep(const Options& o) {
  namespace fs = std::filesystem;
  const std::string text = read_file(o.scenario);
  // Validates the base scenario before any worker starts.
  const twophase::Scenario sc = twophase::parse_scenario_text(text, overrides(o), o.scenario);
  const std::string& key = o.vary.at(0);
  const auto range = twophase::SweepRange::parse(o.vary.at(1));
  const auto rows = twophase::run_sweep(text, o.scenario, overrides(o), key, range,
                                        twophase::sweep_threads());
  const fs::path dir = o.out ? fs::path(*o.out) : fs::path(sc.outputs.directory);
  twophase::write_atomic(dir / "sweep.csv", twophase::sweep_csv(rows));
  std::cout << (dir / "sweep.csv").string() << '\n';
  for (const auto& r : rows)
    if (!r.error.empty()) std::cerr << "twophase: " << key << " = " << r.parameter << ": " << r.error << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phase size-structured population model: dynamics, spectrum and criteria"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("scenario", o.scenario, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory (overrides outputs.directory)");
    sub->add_option("--n", o.n, "Cell count (overrides domain.n)")->check(CLI::PositiveNumber);
    sub->add_option("--dt", o.dt, "Time step (overrides run.dt)")->check(CLI::PositiveNumber);
  };
  auto* simulate = app.add_subcommand("simulate", "Evolve and export trajectory and profiles");
  auto* spectrum = app.add_subcommand("spectrum", "Spectral bound, closed forms and resolvent probes");
  auto* criteria = app.add_subcommand("criteria", "Hypothesis checks and predicted outcome");
  auto* report = app.add_subcommand("report", "Full pipeline with predicted-vs-measured report");
  auto* sweep = app.add_subcommand("sweep", "Spectrum over a range of one scalar parameter");
  for (auto* sub : {simulate, spectrum, criteria, report, sweep}) add_common(sub);
  sweep->add_option("--vary", o.vary, "KEY a:b:step, e.g. --vary kernel.scale 0:2:0.25")
      ->required()
      ->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    using namespace twophase;
    if (*simulate) return run_stages(o, stage_criteria | stage_simulate, nullptr);
    if (*spectrum) return run_stages(o, stage_criteria | stage_spectrum, "spectrum.json");
    if (*criteria) return run_stages(o, stage_criteria, "verdict.json");
    if (*report) return run_stages(o, stage_all, "report.json");
    if (*sweep) return run_sweep(o);
  } catch (const twophase::ConfigError& e) {
    std::cerr << "twophase: configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const twophase::NumericalError& e) {
    std::cerr << "twophase: numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "twophase: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
