// Drives the sepflow binary end to end.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run sh(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + SEPFLOW_CLI + " " + args + " 2>/dev/null";
  FILE* f = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  const int status = pclose(f);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("sepflow_cli_" + std::to_string(::getpid()) + "_" +
                                       ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const char* name) const { return (dir / name).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, GenerateIsDeterministic) {
  ASSERT_EQ(sh("generate -d 2 -n 10 --seed 7 -o " + path("a.json")).code, 0);
  ASSERT_EQ(sh("generate -d 2 -n 10 --seed 7 -o " + path("b.json")).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  const auto j = nlohmann::json::parse(slurp(path("a.json")));
  EXPECT_EQ(j["schema"], 1);
  EXPECT_EQ(j["reds"].size(), 10u);
}

TEST_F(Cli, SeedFromEnvironment) {
  ASSERT_EQ(sh("generate -d 3 -n 4 --seed 9 -o " + path("a.json")).code, 0);
  ASSERT_EQ(sh("generate -d 3 -n 4 -o " + path("b.json"), "SEPFLOW_SEED=9").code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
}

TEST_F(Cli, GaussianLaw) {
  ASSERT_EQ(sh("generate -d 3 -n 30 --law gaussian -o " + path("g.json")).code, 0);
  const auto j = nlohmann::json::parse(slurp(path("g.json")));
  for (const char* c : {"reds", "blues"})
    for (const auto& p : j[c])
      for (double x : p) {
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
      }
}

TEST_F(Cli, SaveConfigReproduces) {
  ASSERT_EQ(sh("--save-config " + path("run.toml") + " generate -d 2 -n 5 --seed 3 -o " + path("a.json")).code, 0);
  ASSERT_EQ(sh("--config " + path("run.toml") + " generate -o " + path("b.json")).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
}

TEST_F(Cli, SeparabilityFamilyVerifies) {
  ASSERT_EQ(sh("generate -d 3 -n 6 --seed 2 -o " + path("p.json")).code, 0);
  const auto r = sh("separability -i " + path("p.json") + " --emit-family " + path("f.json"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Z^1 = "), std::string::npos);
  EXPECT_NE(r.out.find("Z^3 = "), std::string::npos);
  EXPECT_NE(r.out.find("  *"), std::string::npos);
  const auto v = sh("verify -i " + path("p.json") + " -f " + path("f.json"));
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("verified: true"), std::string::npos);
}

TEST_F(Cli, LinearlySeparablePair) {
  std::ofstream(path("s.json")) << R"({"schema":1,"dim":2,"reds":[[0.1,0.3],[0.2,0.7]],"blues":[[0.8,0.4],[0.9,0.6]]})";
  const auto r = sh("separability -i " + path("s.json"));
  EXPECT_NE(r.out.find("Z_perp = 1"), std::string::npos);
}

TEST_F(Cli, PmfTable) {
  const auto r = sh("pmf -N 2");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("1,1/3,"), std::string::npos);
  EXPECT_NE(r.out.find("2,1/3,"), std::string::npos);
  EXPECT_NE(r.out.find("3,1/3,"), std::string::npos);
  EXPECT_EQ(sh("pmf -N 8 --oracle").code, 0);
  const auto j = nlohmann::json::parse(sh("pmf -N 3 --format json").out);
  EXPECT_EQ(j["rows"][2]["mass"], "2/5");
}

TEST_F(Cli, Fig4Rows) {
  const auto r = sh("ccdf -d 2 -N 10 --fig4");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "N,d,k,lower_bound");
  std::map<std::string, int> per_d;
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    ++per_d[line.substr(a + 1, b - a - 1)];
  }
  EXPECT_EQ(per_d.size(), 5u);
  for (const auto& [d, n] : per_d) EXPECT_EQ(n, 19) << d;
}

TEST_F(Cli, MonteCarloAgreesAndIgnoresWorkers) {
  const auto a = sh("montecarlo -d 1 -N 2 --samples 100000 --seed 1");
  EXPECT_EQ(a.code, 0);
  EXPECT_NE(a.out.find("agreement: true"), std::string::npos);
  EXPECT_NE(a.out.find("tv_distance: "), std::string::npos);
  const auto b = sh("montecarlo -d 1 -N 2 --samples 100000 --seed 1 --workers 3");
  EXPECT_EQ(a.out, b.out);
}

TEST_F(Cli, SynthesizeSwitchCounts) {
  ASSERT_EQ(sh("generate -d 2 -n 4 --seed 5 -o " + path("p.json")).code, 0);
  EXPECT_EQ(sh("synthesize -i " + path("p.json") + " --algo truncated").out, "switches: 3\n");
  EXPECT_EQ(sh("synthesize -i " + path("p.json") + " --algo fem").out, "switches: 1\n");
  EXPECT_EQ(sh("synthesize -i " + path("p.json") + " --algo relu-decomposed").out, "switches: 6\n");
  EXPECT_EQ(sh("synthesize -i " + path("p.json") + " --algo bogus").code, 2);
}

TEST_F(Cli, SimulateCertifies) {
  ASSERT_EQ(sh("generate -d 2 -n 4 --seed 5 -o " + path("p.json")).code, 0);
  ASSERT_EQ(sh("synthesize -i " + path("p.json") + " --algo truncated -o " + path("s.json")).code, 0);
  const auto r = sh("simulate -i " + path("p.json") + " -s " + path("s.json") + " --trajectories " + path("t.csv") +
                    " -o " + path("r.json"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("classified: true"), std::string::npos);
  const auto csv = slurp(path("t.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "point_id,leg,t,x1,x2");
  EXPECT_TRUE(nlohmann::json::parse(slurp(path("r.json")))["classified"].get<bool>());

  const auto k = sh("simulate -i " + path("p.json") + " -s " + path("s.json") + " --mode rk4 --step 1e-4");
  EXPECT_EQ(k.code, 0);
  const auto at = k.out.find("max_deviation_vs_exact: ");
  ASSERT_NE(at, std::string::npos);
  EXPECT_LE(std::stod(k.out.substr(at + 24)), 1e-8);
}

TEST_F(Cli, ClusterAndReport) {
  ASSERT_EQ(sh("generate -d 2 -n 6 --seed 8 -o " + path("p.json")).code, 0);
  const auto c = sh("cluster -i " + path("p.json") + " --target 1");
  ASSERT_EQ(c.code, 0);
  EXPECT_EQ(nlohmann::json::parse(c.out)["clusters"].size(), 3u);
  const auto r = sh("report -i " + path("p.json"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("relu-decomposed: switches 10"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(sh("check -i " + path("missing.json")).code, 3);
  std::ofstream(path("bad.json")) << "{not json";
  EXPECT_EQ(sh("check -i " + path("bad.json")).code, 3);
  std::ofstream(path("flat.json")) << R"({"schema":1,"dim":2,"reds":[[0.1,0.1],[0.5,0.5]],"blues":[[0.9,0.9]]})";
  EXPECT_EQ(sh("check -i " + path("flat.json")).code, 2);
  EXPECT_NE(sh("check -i " + path("flat.json")).out.find("general_position: false"), std::string::npos);
  std::ofstream(path("dup.json")) << R"({"schema":1,"dim":1,"reds":[[0.1]],"blues":[[0.1]]})";
  EXPECT_EQ(sh("check -i " + path("dup.json")).code, 2);
}
