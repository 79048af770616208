#pragma once

// Scenario pipeline: assemble, verdict, spectrum, evolution, reports and sweeps.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "twophase/criteria.hpp"
#include "twophase/evolution.hpp"
#include "twophase/scenario.hpp"
#include "twophase/spectral.hpp"

namespace twophase {

enum Stage : unsigned {
  stage_criteria = 1u,
  stage_spectrum = 2u,
  stage_simulate = 4u,
  stage_all = 7u,
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

/// One predicted-vs-measured pair.
struct CrossRef {
  std::string claim;
  /// Result the prediction rests on.
  std::string basis;
  std::string predicted;
  std::optional<std::string> measured;
  std::optional<bool> agrees;
};

struct RunReport {
  std::string scenario_name;
  std::string scenario_echo;
  unsigned stages = 0;
  bool complete = false;
  std::string error;
  int n = 0;
  double h = 0.0;
  DomainKind domain = DomainKind::finite;

  std::optional<Verdict> verdict;
  std::optional<SpectralReport> spectral;
  std::optional<MassBalanceReport> mass_balance;
  std::optional<double> subspace_leakage;
  int steps = 0;
  double final_mass = 0.0;
  std::vector<std::string> files;
  std::vector<StageTiming> timings;
  std::vector<CrossRef> crossrefs;
};

/// Runs the selected stages. Output files go to `out_dir` (created when needed); the
/// report itself is not written here. Stage errors propagate after the partially
/// filled report has been stored in `partial` when one is supplied.
RunReport run_scenario(const Scenario& sc, unsigned stages, const std::filesystem::path& out_dir,
                       RunReport* partial = nullptr);

/// Structured report text. Timing fields are omitted when `with_timings` is false.
std::string report_json(const RunReport& report, bool with_timings = true);

/// Writes through a temporary file in the same directory followed by a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

struct SweepRange {
  double from = 0.0;
  double to = 0.0;
  double step = 1.0;

  /// Parses "a:b:step". Throws ConfigError when malformed.
  static SweepRange parse(const std::string& text);
  std::vector<double> values() const;
};

struct SweepRow {
  double parameter = 0.0;
  std::optional<double> s_A;
  std::optional<double> lambda_star;
  std::optional<double> eps_bar;
  std::optional<double> gap;
  std::string error;
};

/// Spectrum stage for every value of `key`, run on up to `threads` workers.
/// Config errors abort the sweep; numerical failures leave NA cells in their row.
std::vector<SweepRow> run_sweep(const std::string& scenario_text, const std::string& origin,
                                const Overrides& base, const std::string& key,
                                const SweepRange& range, unsigned threads);

/// CSV with header parameter,s_A,lambda_star,eps_bar,gap; absent values are NA.
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Worker count from TWOPHASE_THREADS, capped by the hardware concurrency.
unsigned sweep_threads();

}  // namespace twophase
