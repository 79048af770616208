#pragma once

// Scenario files: a strict JSON schema describing grid, coefficients, kernel and run settings.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twophase/grid.hpp"

namespace twophase {

struct RunSpec {
  double dt = 1e-3;
  double T = 10.0;
  int record_every = 100;
  /// Absent means the default: normalized indicator of the first quarter, phase 1 only.
  std::optional<std::pair<Coefficient, Coefficient>> u0;
};

struct SpectralSpec {
  double tol = 1e-10;
  std::optional<double> shift0;
  int max_iterations = 2000;
  /// Truncation lengths for the resolvent probe; default {L/4, L/2, L}.
  std::vector<double> smax_list;
  std::vector<double> probe_lambdas;
};

struct OutputSpec {
  std::string directory = "out";
  /// Times at which profiles are dumped (nearest record). Default: final time only.
  std::vector<double> profile_times;
  bool export_matrix = false;
};

struct Scenario {
  std::string name = "scenario";
  DomainSpec domain;
  int n = 200;
  ModelParamsSpec coefficients;
  KernelSpec kernel = KernelSpec::constant(0.0);
  RunSpec run;
  SpectralSpec spectral;
  OutputSpec outputs;
  /// Normalized JSON of the accepted input, overrides applied.
  std::string canonical;

  SizeGrid grid() const { return build_grid(domain, n); }
};

/// Dotted key -> numeric value, e.g. {"kernel.scale", 0.5}, applied before validation.
using Overrides = std::map<std::string, double>;

/// Parses and validates a scenario. Syntax errors are reported with their line;
/// schema and model violations throw ValidationError naming the field path.
Scenario parse_scenario_text(const std::string& text, const Overrides& overrides = {},
                             const std::string& origin = "<scenario>");
Scenario parse_scenario(const std::filesystem::path& path, const Overrides& overrides = {});

}  // namespace twophase
