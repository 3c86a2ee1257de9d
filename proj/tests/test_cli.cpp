#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "platform_egt/cli.hpp"

namespace fs = std::filesystem;
using namespace platform_egt;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("platform_egt_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "platform_egt");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  std::string write_config(const std::string& name, const std::string& body) {
    const auto p = dir_ / name;
    std::ofstream(p) << body;
    return p.string();
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
  }

  static std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

const std::string kSmall = R"({"z_d": 5, "z_m": 5, "k": 4, "epsilon": 0.2, "gamma": 0.6, "k_g": 2, "beta": 200})";

}  // namespace

TEST_F(CliTest, StationaryWritesBundle) {
  const auto cfg = write_config("c.json", kSmall);
  const auto out = dir_ / "out";
  ASSERT_EQ(run({"--config", cfg, "--out", out.string(), "stationary"}), 0) << err_.str();
  EXPECT_EQ(first_line(out / "stationary.csv"), "h_m,h_d,prob");
  EXPECT_EQ(first_line(out / "drift.csv"), "h_m,h_d,d_m,d_d");
  EXPECT_EQ(line_count(out / "stationary.csv"), 37u);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["status"], "ok");
  EXPECT_EQ(manifest["tables"].size(), 2u);
  EXPECT_EQ(manifest["tables"][0]["rows"], 36);
  EXPECT_EQ(manifest["config"]["k"], 4);
  const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
  for (const char* key : {"coop_mass_m", "coop_mass_d", "regime", "ux", "dpr", "u_bar_m", "u_bar_d"}) {
    EXPECT_TRUE(metrics.contains(key)) << key;
  }
}

TEST_F(CliTest, MalformedConfigExitsOne) {
  const auto bad = write_config("bad.json", R"({"k": 10, "gama": 0.5})");
  EXPECT_EQ(run({"--config", bad, "--out", (dir_ / "o").string(), "stationary"}), 1);
  EXPECT_NE(err_.str().find("gama"), std::string::npos);
  const auto broken = write_config("broken.json", R"({"k": 10, )");
  EXPECT_EQ(run({"--config", broken, "--out", (dir_ / "o").string(), "stationary"}), 1);
  const auto typed = write_config("typed.json", R"({"gamma": "x"})");
  EXPECT_EQ(run({"--config", typed, "--out", (dir_ / "o").string(), "stationary"}), 1);
  EXPECT_NE(err_.str().find("gamma"), std::string::npos);
}

TEST_F(CliTest, MissingConfigIsIoError) {
  EXPECT_EQ(run({"--config", (dir_ / "nope.json").string(), "--out", (dir_ / "o").string(), "stationary"}), 2);
}

TEST_F(CliTest, UnwritableOutputIsIoError) {
  const auto file = write_config("plain", "x");
  EXPECT_EQ(run({"--out", (fs::path(file) / "sub").string(), "stationary"}), 2);
}

TEST_F(CliTest, ReducibleChainIsSolverFailure) {
  const auto cfg = write_config("mu0.json", R"({"z_d": 3, "z_m": 3, "k": 2, "mu": 0})");
  EXPECT_EQ(run({"--config", cfg, "--out", (dir_ / "o").string(), "stationary"}), 3);
}

TEST_F(CliTest, SweepDegenerateRangeSingleRow) {
  const auto cfg = write_config("c.json", kSmall);
  const auto out = dir_ / "s";
  ASSERT_EQ(run({"--config", cfg, "--out", out.string(), "sweep", "--axis", "kg", "--range", "3:3"}), 0) << err_.str();
  EXPECT_EQ(first_line(out / "sweep.csv"), "axis_value,ux,dpr,coop_m,coop_d,u_bar_m,u_bar_d,regime");
  EXPECT_EQ(line_count(out / "sweep.csv"), 2u);
}

TEST_F(CliTest, SweepRejectsBadAxisAndRange) {
  const auto cfg = write_config("c.json", kSmall);
  EXPECT_EQ(run({"--config", cfg, "--out", (dir_ / "x").string(), "sweep", "--axis", "k", "--range", "0:1"}), 1);
  EXPECT_EQ(run({"--config", cfg, "--out", (dir_ / "x").string(), "sweep", "--axis", "kg", "--range", "0:9"}), 1);
  EXPECT_EQ(run({"--config", cfg, "--out", (dir_ / "x").string(), "sweep", "--axis", "eps", "--range", "0.1"}), 1);
}

TEST_F(CliTest, AutoKgClipsKmRange) {
  const auto cfg = write_config("c.json", kSmall);
  const auto out = dir_ / "a";
  ASSERT_EQ(run({"--config", cfg, "--out", out.string(), "sweep", "--axis", "km", "--range", "0:4", "--auto-kg"}), 0)
      << err_.str();
  const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
  const int kg = metrics["selected_k_g"];
  EXPECT_EQ(line_count(out / "sweep.csv"), static_cast<std::size_t>(kg) + 2);
  EXPECT_EQ(run({"--config", cfg, "--out", (dir_ / "x").string(), "sweep", "--axis", "kg", "--range", "0:4",
                 "--auto-kg"}),
            1);
}

TEST_F(CliTest, FloatAxisRange) {
  const auto cfg = write_config("c.json", kSmall);
  const auto out = dir_ / "e";
  ASSERT_EQ(run({"--config", cfg, "--out", out.string(), "sweep", "--axis", "eps", "--range", "0:0.5:0.1"}), 0);
  EXPECT_EQ(line_count(out / "sweep.csv"), 7u);
}

TEST_F(CliTest, ParetoMapUncertaintyTables) {
  const auto cfg = write_config("c.json", kSmall);
  const auto p = dir_ / "p";
  ASSERT_EQ(run({"--config", cfg, "--out", p.string(), "pareto", "--all-policies"}), 0) << err_.str();
  EXPECT_EQ(first_line(p / "pareto.csv"), "k_g,k_m,ux,dpr,on_front");
  EXPECT_EQ(line_count(p / "pareto.csv"), 16u);
  const auto m = dir_ / "m";
  ASSERT_EQ(run({"--config", cfg, "--out", m.string(), "map", "--grid", "2"}), 0) << err_.str();
  EXPECT_EQ(first_line(m / "map.csv"), "epsilon,gamma,kg_dpr,feasible");
  EXPECT_EQ(line_count(m / "map.csv"), 5u);
  const auto u = dir_ / "u";
  ASSERT_EQ(run({"--config", cfg, "--out", u.string(), "uncertainty", "--widths", "0:0.2:0.1", "--grid-points", "3"}),
            0)
      << err_.str();
  EXPECT_EQ(first_line(u / "uncertainty.csv"), "width,objective,k_g,k_m,worst_dpr,avg_dpr,baseline_worst_dpr");
  EXPECT_EQ(line_count(u / "uncertainty.csv"), 7u);
}

TEST_F(CliTest, UncertaintyZeroWidthMatchesPointOptimum) {
  const auto cfg = write_config("c.json", kSmall);
  const auto u = dir_ / "u";
  ASSERT_EQ(run({"--config", cfg, "--out", u.string(), "uncertainty", "--widths", "0:0"}), 0) << err_.str();
  const auto metrics = nlohmann::json::parse(slurp(u / "metrics.json"));
  const auto chosen = metrics["widths"][0]["maximin_dpr"]["policy"];
  // Point optimum over all regime-C policies at the config epsilon.
  const auto model = parse_config(kSmall);
  std::optional<PlatformPolicy> best;
  double best_dpr = -1;
  for (const auto& pol : sweep::all_policies(model.users.k)) {
    ModelConfig c = model;
    c.policy = pol;
    const auto r = metrics::evaluate(c).metrics;
    if (r.regime == metrics::Regime::C && r.dpr > best_dpr) {
      best_dpr = r.dpr;
      best = pol;
    }
  }
  ASSERT_TRUE(best.has_value());
  EXPECT_EQ(chosen["k_g"], best->k_g);
  EXPECT_EQ(chosen["k_m"], best->k_m);
}

TEST_F(CliTest, OracleCheckSmallBattery) {
  const auto o = dir_ / "o";
  ASSERT_EQ(run({"--out", o.string(), "--seed", "5", "oracle-check", "--cases", "3", "--episodes", "50000"}), 0)
      << err_.str();
  EXPECT_EQ(first_line(o / "oracle.csv"), "category,exact,empirical,stderr,z_score");
}

TEST_F(CliTest, TablesIdenticalAcrossThreadCounts) {
  const auto cfg = write_config("c.json", kSmall);
  const std::vector<std::vector<std::string>> commands = {
      {"stationary"},
      {"sweep", "--axis", "kg", "--range", "0:4"},
      {"pareto", "--all-policies"},
      {"map", "--grid", "2"},
      {"uncertainty", "--widths", "0:0.2:0.1", "--grid-points", "3"},
      {"oracle-check", "--cases", "2", "--episodes", "40000"}};
  for (const auto& cmd : commands) {
    std::vector<fs::path> outs;
    for (const char* threads : {"1", "3", "1"}) {
      const auto out = dir_ / (cmd[0] + "_" + std::to_string(outs.size()));
      std::vector<std::string> args{"--config", cfg, "--out", out.string(), "--threads", threads, "--seed", "9"};
      args.insert(args.end(), cmd.begin(), cmd.end());
      ASSERT_EQ(run(args), 0) << cmd[0] << err_.str();
      outs.push_back(out);
    }
    for (const auto& entry : fs::directory_iterator(outs[0])) {
      const auto name = entry.path().filename();
      if (name == "manifest.json") continue;
      EXPECT_EQ(slurp(outs[0] / name), slurp(outs[1] / name)) << cmd[0] << " " << name;
      EXPECT_EQ(slurp(outs[0] / name), slurp(outs[2] / name)) << cmd[0] << " " << name;
    }
  }
}

TEST_F(CliTest, ThreadsFromEnvironment) {
  ::setenv("PLATFORM_EGT_THREADS", "0x", 1);
  EXPECT_EQ(run({"--out", (dir_ / "o").string(), "stationary"}), 1);
  ::setenv("PLATFORM_EGT_THREADS", "2", 1);
  const auto cfg = write_config("c.json", kSmall);
  EXPECT_EQ(run({"--config", cfg, "--out", (dir_ / "o").string(), "stationary"}), 0);
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "o" / "manifest.json"));
  EXPECT_EQ(manifest["threads"], 2);
  ::unsetenv("PLATFORM_EGT_THREADS");
}

#ifdef PLATFORM_EGT_CONFIG_DIR
TEST_F(CliTest, BundledConfigsParse) {
  for (const auto& entry : fs::recursive_directory_iterator(PLATFORM_EGT_CONFIG_DIR)) {
    if (entry.path().extension() == ".json") {
      EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
    }
  }
}
#endif
