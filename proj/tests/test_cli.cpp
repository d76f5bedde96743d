#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef COXNAM_CLI
#error "COXNAM_CLI must name the command-line binary"
#endif

namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "coxnam_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& log = "log.txt") {
  const std::string cmd = std::string(COXNAM_CLI) + " " + args + " > " +
                          (work_dir() / log).string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string w(const std::string& name) { return (work_dir() / name).string(); }

double report_value(const std::string& report, const std::string& key) {
  const auto p = report.find("\n" + key + " ");
  if (p == std::string::npos) return -1;
  return std::stod(report.substr(p + key.size() + 2));
}

void ensure_synth() {
  if (fs::exists(w("syn/dataset.csv"))) return;
  ASSERT_EQ(run("synth --out " + w("syn") + " --seed 7"), 0);
}

}  // namespace

TEST(Cli, FitReportsUsefulTestCIndex) {
  ensure_synth();
  ASSERT_EQ(run("fit --data " + w("syn/dataset.csv") + " --schema " + w("syn/schema.txt") +
                " --out " + w("fit") + " --trees 50 --seed 1"),
            0);
  EXPECT_GT(report_value(slurp(w("fit/report.txt")), "c_index_test"), 0.6);
}

TEST(Cli, SameSeedSameForestBytes) {
  ensure_synth();
  for (const char* out : {"fa", "fb"}) {
    ASSERT_EQ(run("fit --data " + w("syn/dataset.csv") + " --schema " + w("syn/schema.txt") +
                  " --out " + w(out) + " --trees 10 --seed 3"),
              0);
  }
  EXPECT_EQ(slurp(w("fa/forest.bin")), slurp(w("fb/forest.bin")));
}

TEST(Cli, MissingSchemaNamesThePath) {
  ensure_synth();
  EXPECT_EQ(run("fit --data " + w("syn/dataset.csv") + " --schema " + w("nope.schema") +
                " --out " + w("bad")),
            3);
  const std::string log = slurp(w("log.txt"));
  EXPECT_NE(log.find("nope.schema"), std::string::npos);
  EXPECT_NE(log.find("error kind=data"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("fit --data x.csv"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("synth --out " + w("s2") + " --terms linear,wiggle"), 2);
}

TEST(Cli, LocalNeedsCenter) {
  ensure_synth();
  ASSERT_EQ(run("fit --data " + w("syn/dataset.csv") + " --schema " + w("syn/schema.txt") +
                " --out " + w("fl") + " --trees 5"),
            0);
  EXPECT_EQ(run("explain --forest " + w("fl/forest.bin") + " --data " + w("syn/dataset.csv") +
                " --out " + w("el") + " --mode local --epochs 5"),
            2);
  EXPECT_EQ(run("explain --forest " + w("fl/forest.bin") + " --data " + w("syn/dataset.csv") +
                " --out " + w("el") + " --mode local --center-row 4 --epochs 20 --points 20"),
            0);
  EXPECT_TRUE(fs::exists(w("el/shapes.svg")));
  EXPECT_TRUE(fs::exists(w("el/report.txt")));
}

TEST(Cli, ConstantForestGivesFlatCurves) {
  ensure_synth();
  ASSERT_EQ(run("fit --data " + w("syn/dataset.csv") + " --schema " + w("syn/schema.txt") +
                " --out " + w("fc") + " --trees 5 --min-leaf-events 100000"),
            0);
  ASSERT_EQ(run("explain --forest " + w("fc/forest.bin") + " --data " + w("syn/dataset.csv") +
                " --out " + w("ec") + " --epochs 100 --variant lasso --lambda 0.5"),
            0);
  const std::string csv = slurp(w("ec/explanation.csv"));
  EXPECT_NE(csv.find("variant,lasso\n"), std::string::npos);
  EXPECT_NE(csv.find("lambda,0.5\n"), std::string::npos);
  EXPECT_NE(csv.find("mu,0\n"), std::string::npos);
  std::istringstream in(csv.substr(csv.find("[curves]")));
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  double worst = 0;
  while (std::getline(in, line)) {
    worst = std::max(worst, std::abs(std::stod(line.substr(line.rfind(',') + 1))));
  }
  EXPECT_LT(worst, 0.05);
}

TEST(Cli, ConfigFilePrecedence) {
  ensure_synth();
  std::ofstream(w("fit.toml")) << "[fit]\ntrees=7\nseed=9\n";
  ASSERT_EQ(run("fit --config " + w("fit.toml") + " --seed 4 --data " + w("syn/dataset.csv") +
                    " --schema " + w("syn/schema.txt") + " --out " + w("fcfg"),
                "cfg.txt"),
            0);
  const std::string log = slurp(w("cfg.txt"));
  EXPECT_NE(log.find("trees=7"), std::string::npos);
  EXPECT_NE(log.find("seed=4"), std::string::npos);
  EXPECT_NE(log.find("min-leaf-events=15"), std::string::npos);
}

TEST(Cli, EvalScoresTestSplit) {
  ensure_synth();
  ASSERT_EQ(run("fit --data " + w("syn/dataset.csv") + " --schema " + w("syn/schema.txt") +
                " --out " + w("fe") + " --trees 20"),
            0);
  ASSERT_EQ(run("explain --forest " + w("fe/forest.bin") + " --data " + w("syn/dataset.csv") +
                " --out " + w("ee") + " --epochs 100"),
            0);
  ASSERT_EQ(run("eval --forest " + w("fe/forest.bin") + " --model " + w("ee/nam.json") +
                " --data " + w("syn/dataset.csv") + " --out " + w("ev")),
            0);
  const std::string rep = slurp(w("ev/report.txt"));
  const std::string ex = slurp(w("ee/report.txt"));
  EXPECT_EQ(report_value(rep, "c_index_surrogate"), report_value(ex, "c_index_surrogate"));
  EXPECT_GT(report_value(rep, "c_index_blackbox"), 0.5);
}
