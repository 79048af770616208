#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "twophase/error.hpp"
#include "twophase/report.hpp"

using namespace twophase;
namespace fs = std::filesystem;

namespace {

fs::path data(const char* name) { return fs::path(TWOPHASE_TEST_DATA) / name; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("twophase_report_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(RunScenario, AegScenarioAgrees) {
  const Scenario sc = parse_scenario(data("irreducible.json"));
  const RunReport rep = run_scenario(sc, stage_all, scratch("aeg"));
  ASSERT_TRUE(rep.complete);
  EXPECT_EQ(rep.verdict->predicted, Predicted::irreducible_gap_aeg);
  ASSERT_TRUE(rep.spectral->aeg.has_value());
  EXPECT_NEAR(rep.spectral->aeg->lambda0_fit, rep.spectral->s_A, 1e-3 * std::abs(rep.spectral->s_A));
  for (const auto& c : rep.crossrefs) {
    EXPECT_FALSE(c.predicted.empty()) << c.claim;
    EXPECT_FALSE(c.basis.empty()) << c.claim;
    if (c.agrees) EXPECT_TRUE(*c.agrees) << c.claim;
  }
}

TEST(RunScenario, EmptySpectrumBelowThreshold) {
  const Scenario sc = parse_scenario(data("one_sided.json"));
  const RunReport rep = run_scenario(sc, stage_criteria | stage_spectrum, scratch("empty"));
  EXPECT_EQ(rep.verdict->predicted, Predicted::empty_spectrum);
  EXPECT_LT(rep.spectral->s_A, -sc.coefficients.gamma0 / rep.h * 0.5);
}

TEST(RunScenario, ZeroHorizon) {
  const Scenario sc = parse_scenario(data("zero_horizon.json"));
  const fs::path out = scratch("zero");
  const RunReport rep = run_scenario(sc, stage_all, out);
  EXPECT_TRUE(rep.complete);
  EXPECT_EQ(rep.steps, 0);
  EXPECT_FALSE(rep.spectral->aeg.has_value());
  EXPECT_TRUE(rep.verdict.has_value());
  std::ifstream in(out / "trajectory.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 2);
}

TEST(RunScenario, CriteriaStageWritesNothing) {
  const Scenario sc = parse_scenario(data("irreducible.json"));
  const fs::path out = scratch("criteria");
  const RunReport rep = run_scenario(sc, stage_criteria, out);
  EXPECT_TRUE(rep.files.empty());
  EXPECT_FALSE(fs::exists(out / "trajectory.csv"));
  EXPECT_FALSE(rep.spectral.has_value());
}

TEST(RunScenario, PartialReportOnFailure) {
  const Scenario sc = parse_scenario(data("iteration_budget.json"));
  RunReport partial;
  EXPECT_THROW(run_scenario(sc, stage_all, scratch("partial"), &partial), NumericalError);
  EXPECT_FALSE(partial.complete);
  EXPECT_FALSE(partial.error.empty());
  EXPECT_TRUE(partial.verdict.has_value());
  const std::string text = report_json(partial);
  EXPECT_NE(text.find("\"complete\": false"), std::string::npos);
}

TEST(RunScenario, DeterministicReports) {
  const Scenario sc = parse_scenario(data("constant_truncated.json"));
  const std::string a = report_json(run_scenario(sc, stage_all, scratch("det_a")), false);
  const std::string b = report_json(run_scenario(sc, stage_all, scratch("det_b")), false);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.find("seconds"), std::string::npos);
}

TEST(RunScenario, ConstantCaseClosedForms) {
  const Scenario sc = parse_scenario(data("constant_truncated.json"));
  const RunReport rep = run_scenario(sc, stage_criteria | stage_spectrum, scratch("closed"));
  ASSERT_TRUE(rep.spectral->lambda_star.has_value());
  ASSERT_TRUE(rep.spectral->eps_bar.has_value());
  EXPECT_NEAR(*rep.spectral->lambda_star, (-3 + std::sqrt(5.0)) / 2, 1e-12);
  ASSERT_EQ(rep.spectral->probes.size(), 2u);
  // -0.5 lies below lambda_star, 0.5 above.
  EXPECT_EQ(rep.spectral->probes[0].classification, ProbeClass::diverging);
  EXPECT_EQ(rep.spectral->probes[1].classification, ProbeClass::bounded);
}

TEST(WriteAtomic, ReplacesContent) {
  const fs::path dir = scratch("atomic");
  write_atomic(dir / "x.txt", "one");
  write_atomic(dir / "x.txt", "two");
  std::ifstream in(dir / "x.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "two");
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_EQ(e.path().filename(), "x.txt");
}

TEST(Sweep, RangeArithmetic) {
  const SweepRange r = SweepRange::parse("0:2:0.25");
  const auto v = r.values();
  ASSERT_EQ(v.size(), 9u);
  EXPECT_DOUBLE_EQ(v.back(), 2.0);
  EXPECT_EQ(SweepRange::parse("1:1:0.5").values().size(), 1u);
  EXPECT_THROW(SweepRange::parse("0:2"), ConfigError);
  EXPECT_THROW(SweepRange::parse("0:2:0"), ConfigError);
  EXPECT_THROW(SweepRange::parse("2:0:1"), ConfigError);
}

TEST(Sweep, RowsInOrderAcrossThreads) {
  std::ifstream in(data("irreducible.json"));
  std::stringstream ss;
  ss << in.rdbuf();
  const auto range = SweepRange::parse("0:1:0.25");
  const auto one = run_sweep(ss.str(), "irreducible.json", {}, "kernel.scale", range, 1);
  const auto many = run_sweep(ss.str(), "irreducible.json", {}, "kernel.scale", range, 3);
  ASSERT_EQ(one.size(), 5u);
  EXPECT_EQ(sweep_csv(one), sweep_csv(many));
  for (std::size_t i = 1; i < one.size(); ++i) EXPECT_GT(*one[i].s_A, *one[i - 1].s_A);
  EXPECT_EQ(sweep_csv(one).substr(0, 37), "parameter,s_A,lambda_star,eps_bar,gap");
}

TEST(Sweep, ConfigErrorsAbort) {
  std::ifstream in(data("irreducible.json"));
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_THROW(run_sweep(ss.str(), "x", {}, "coefficients.mu", SweepRange::parse("-1:0:1"), 2), ConfigError);
}
