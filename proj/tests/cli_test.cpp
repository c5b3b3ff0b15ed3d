#include <sys/wait.h>

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(PHI42_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {};
  Outcome r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("phi42_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  std::string small_config(const std::string& extra_solver = "") {
    return "[grid]\nL = 2\nN = 4\n[solver]\neps = 0.05\ndt = 0.01\nT = 1\nsample_every = 5\n" + extra_solver +
           "[run]\noutput = " + (dir_ / "run").string() + "\n[init]\nfield = random:-1,0.1,4\n";
  }

  fs::path dir_;
};

TEST_F(Cli, PrefactorPrintsJson) {
  const Outcome r = run("prefactor --L 2 --ntrunc 64");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["prefactor"].get<double>(), 19.010819927107374, 1e-12);
  EXPECT_DOUBLE_EQ(j["barrier"].get<double>(), 1.0);
  EXPECT_GT(j["tail_bound"].get<double>(), 0.0);
}

TEST_F(Cli, RenormAndBesovPrintJson) {
  const Outcome r = run("renorm --L 3.141592653589793 --N 1");
  ASSERT_EQ(r.code, 0);
  const double pi2 = 3.141592653589793 * 3.141592653589793;
  EXPECT_NEAR(nlohmann::json::parse(r.out)["renorm"].get<double>(), (1 + 4.0 / 5 + 4.0 / 9) / pi2, 1e-12);
  const Outcome b = run("besov --field const:-1.5 --L 2 --N 4 --alpha 0.3 --p 2 --q inf");
  ASSERT_EQ(b.code, 0);
  EXPECT_NEAR(nlohmann::json::parse(b.out)["norm"].get<double>(), 1.5, 1e-14);
}

TEST_F(Cli, RuinReportsExactAndMonteCarlo) {
  const Outcome r = run("ruin --lambda 2 --loss det:1 --paths 4000 --nmax 500 --seed 3");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["exact"].get<double>(), 0.5);
  EXPECT_NEAR(j["mc"].get<double>(), 0.5, 4 * j["stderr"].get<double>());
  EXPECT_EQ(run("ruin --lambda 0.5 --loss det:1").code, 2);
  EXPECT_EQ(run("ruin --lambda 2 --loss pareto:1").code, 2);
  const Outcome fig = run("ruin --figure --eps 0.01 --seed 2024");
  ASSERT_EQ(fig.code, 0);
  EXPECT_NE(fig.out.find("N,f,g,S\n"), std::string::npos);
  EXPECT_EQ(std::count(fig.out.begin(), fig.out.end(), '\n'), 52);
}

TEST_F(Cli, ValidationFailuresExitWithTwo) {
  const fs::path ok = write_config("ok.ini", small_config());
  EXPECT_EQ(run("couple --config " + ok.string() + " --seeds 0").code, 2);
  const fs::path bad = write_config("bad.ini", "[stopping]\ngamma = 0.4\n");
  EXPECT_EQ(run("simulate --config " + bad.string()).code, 2);
  const fs::path unknown = write_config("unknown.ini", "[grid]\nwidth = 3\n");
  EXPECT_EQ(run("simulate --config " + unknown.string()).code, 2);
  EXPECT_EQ(run("simulate --config /nonexistent.ini").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, NumericalAbortExitsWithThree) {
  const fs::path cfg = write_config("blow.ini", small_config("blowup = 0.5\n"));
  EXPECT_EQ(run("simulate --config " + cfg.string()).code, 3);
}

TEST_F(Cli, SimulateIsByteIdenticalAndTagged) {
  const fs::path cfg = write_config("sim.ini", small_config());
  ASSERT_EQ(run("simulate --config " + cfg.string()).code, 0);
  const std::string first = slurp(dir_ / "run_trajectory.csv");
  ASSERT_EQ(run("simulate --config " + cfg.string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "run_trajectory.csv"), first);
  EXPECT_EQ(first.rfind("# phi42 config_hash=", 0), 0u);
  EXPECT_NE(first.find("\nt,mean,holder_beta,dist_plus,dist_minus\n"), std::string::npos);

  const auto summary = nlohmann::json::parse(slurp(dir_ / "run_summary.json"));
  EXPECT_EQ(summary["schema"], 1);
  EXPECT_NE(first.find(summary["config_hash"].get<std::string>()), std::string::npos);

  ASSERT_EQ(run("simulate --config " + cfg.string() + " --seed 2").code, 0);
  EXPECT_NE(slurp(dir_ / "run_trajectory.csv"), first);
}

TEST_F(Cli, CoupleAndTransitionWriteTheirArtifacts) {
  const fs::path cfg = write_config("c.ini", small_config());
  const Outcome c = run("couple --config " + cfg.string() + " --seeds 2 --fit-start 0.2 --fit-end 1");
  ASSERT_EQ(c.code, 0);
  EXPECT_EQ(nlohmann::json::parse(c.out)["seeds"], 2);
  EXPECT_TRUE(fs::exists(dir_ / "run_coupling.csv"));
  EXPECT_EQ(run("couple --config " + cfg.string() + " --seeds 2").code, 2);  // default window ends at 6 > T

  const fs::path t = write_config(
      "t.ini", "[grid]\nL = 1.5\nN = 4\n[solver]\ndt = 0.02\n[run]\noutput = " + (dir_ / "tr").string() + "\n");
  const Outcome r = run("transition --config " + t.string() + " --eps-grid 0.4,0.3,0.25 --replicas 4");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.contains("arrhenius"));
  EXPECT_EQ(j["per_eps"].size(), 3u);
  EXPECT_TRUE(fs::exists(dir_ / "tr_hitting.csv"));
}

}  // namespace
