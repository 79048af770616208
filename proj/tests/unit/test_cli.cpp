#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

fs::path data(const char* name) { return fs::path(TWOPHASE_TEST_DATA) / name; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("twophase_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(TWOPHASE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, CriteriaWritesVerdictOnly) {
  const fs::path out = scratch("criteria");
  EXPECT_EQ(run("criteria " + data("irreducible.json").string() + " --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "verdict.json"));
  EXPECT_FALSE(fs::exists(out / "trajectory.csv"));
  EXPECT_FALSE(fs::exists(out / "eigenfunction.csv"));
}

TEST(Cli, SimulateExportsCsv) {
  const fs::path out = scratch("simulate");
  EXPECT_EQ(run("simulate " + data("irreducible.json").string() + " --out " + out.string() + " --n 40 --dt 0.05"), 0);
  const std::string traj = slurp(out / "trajectory.csv");
  EXPECT_EQ(traj.substr(0, traj.find('\n')), "t,mass_total,mass_u1,mass_u2");
  // T = 5 at dt = 0.05: header + 101 rows.
  EXPECT_EQ(std::count(traj.begin(), traj.end(), '\n'), 102);
  EXPECT_FALSE(fs::exists(out / "eigenfunction.csv"));
}

TEST(Cli, ReportRuns) {
  const fs::path out = scratch("report");
  EXPECT_EQ(run("report " + data("irreducible.json").string() + " --out " + out.string()), 0);
  const std::string rep = slurp(out / "report.json");
  EXPECT_NE(rep.find("\"complete\": true"), std::string::npos);
  EXPECT_NE(rep.find("crossrefs"), std::string::npos);
}

TEST(Cli, SpectrumHasClosedForms) {
  const fs::path out = scratch("spectrum");
  EXPECT_EQ(run("spectrum " + data("constant_truncated.json").string() + " --out " + out.string()), 0);
  const std::string rep = slurp(out / "spectrum.json");
  EXPECT_NE(rep.find("\"lambda_star\": -0.38"), std::string::npos) << rep.substr(0, 2000);
  EXPECT_NE(rep.find("\"eps_bar\": 0.38"), std::string::npos);
  EXPECT_FALSE(fs::exists(out / "trajectory.csv"));
}

TEST(Cli, SweepRowCount) {
  const fs::path out = scratch("sweep");
  EXPECT_EQ(run("sweep " + data("irreducible.json").string() + " --vary kernel.scale 0:2:0.25 --n 40 --out " +
                out.string()),
            0);
  const std::string csv = slurp(out / "sweep.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "parameter,s_A,lambda_star,eps_bar,gap");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const fs::path out = scratch("config");
  EXPECT_EQ(run("criteria " + data("negative_mu.json").string() + " --out " + out.string()), 2);
  EXPECT_EQ(run("criteria " + data("syntax_error.json").string() + " --out " + out.string()), 2);
  EXPECT_EQ(run("criteria " + data("does_not_exist.json").string()), 2);
  EXPECT_EQ(run("sweep " + data("irreducible.json").string() + " --vary kernel.scale 0:2"), 2);
}

TEST(Cli, NumericalFailureExitsThreeWithPartialReport) {
  const fs::path out = scratch("numerical");
  EXPECT_EQ(run("report " + data("iteration_budget.json").string() + " --out " + out.string()), 3);
  const std::string rep = slurp(out / "report.json");
  EXPECT_NE(rep.find("\"complete\": false"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(run(""), 0);
  EXPECT_NE(run("explode " + data("irreducible.json").string()), 0);
  EXPECT_EQ(run("--help"), 0);
}
