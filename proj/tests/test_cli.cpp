#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(GCORR_CLI) + ' ' + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("gcorr_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateIsDeterministic) {
  const auto a = run("simulate --preset six-factor --n 1000 --seed 3");
  const auto b = run("simulate --preset six-factor --n 1000 --seed 3");
  const auto c = run("simulate --preset six-factor --n 1000 --seed 4");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_EQ(a.out.rfind("Y:2,A:2,B:2,C:2,D:2,E:2,count\n", 0), 0u);
  std::istringstream lines(a.out);
  std::string line;
  std::getline(lines, line);
  long total = 0, rows = 0;
  while (std::getline(lines, line)) {
    total += std::stol(line.substr(line.rfind(',') + 1));
    ++rows;
  }
  EXPECT_EQ(rows, 64);
  EXPECT_EQ(total, 1000);
}

TEST_F(Cli, FitWritesSummaryAndChain) {
  const auto data = write("six.csv", run("simulate --preset six-factor --n 1000 --seed 3").out);
  const auto r = run("fit --data " + data + " --model YAB+YCD+YE --burnin 2000 --iters 3000 --json --out " + path("out"));
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  ASSERT_EQ(j["summary"]["parameters"].size(), 16u);
  EXPECT_EQ(j["summary"]["parameters"][0]["label"], "Intercept");
  EXPECT_EQ(j["model"], "YE+YAB+YCD");
  EXPECT_GT(j["deviance_at_mle"].get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(path("out/summary.json")));
  std::ifstream chain(path("out/chain.csv"));
  std::string header, line;
  std::getline(chain, header);
  EXPECT_NE(header.find("YAB"), std::string::npos);
  long rows = 0;
  while (std::getline(chain, line)) ++rows;
  EXPECT_EQ(rows, 3000);

  const auto logit = run("fit --data " + data + " --model E+AB+CD --outcome Y --burnin 2000 --iters 3000 --json");
  ASSERT_EQ(logit.code, 0);
  EXPECT_EQ(json::parse(logit.out)["summary"]["parameters"].size(), 8u);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("fit --data " + path("missing.csv") + " --model XY").code, 2);
  const auto data = write("t.csv", "X,Y,count\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n");
  EXPECT_EQ(run("fit --data " + data + " --model XW").code, 2);
  EXPECT_EQ(run("fit --data " + data + " --model XY --g banana").code, 2);
  EXPECT_EQ(run("fit --data " + data).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("simulate --factors X:2,Y:2 --model XY --lambda 1,2").code, 2);
  EXPECT_EQ(run("correspond --factors X:3,Y:3 --model XY --outcome Y").code, 2);
}

TEST_F(Cli, CorrespondPrintsIdentitiesAndPriorCheck) {
  const auto r = run("correspond --factors X:3,Y:2,Z:2 --model XY+XZ+YZ --outcome Y --json");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["logistic"], "X+Z");
  EXPECT_EQ(j["q"], 1);
  const auto ids = j["identities"].get<std::vector<std::string>>();
  ASSERT_EQ(ids.size(), 4u);
  EXPECT_EQ(ids[0], "beta[Intercept] = lambda[Y(1)]");
  EXPECT_EQ(ids[2], "beta[X(2)] = lambda[XY(2,1)]");
  EXPECT_TRUE(j["implied_prior_check"]["pass"].get<bool>());
  EXPECT_LT(j["implied_prior_check"]["max_rel_diff"].get<double>(), 1e-10);
}

TEST_F(Cli, CorrespondLogisticEmitsTwoPreimages) {
  const auto r = run("correspond --factors X:3,Y:2,Z:2 --model X+Z --outcome Y --logistic --json");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["deviance_equivalent_loglinear"], "XY+XZ+YZ");
  EXPECT_EQ(j["preimages"], json::array({"XY+XZ+YZ", "XY+YZ"}));
  EXPECT_TRUE(j["preimages_map_to_same_logistic"].get<bool>());
}

TEST_F(Cli, SelectEnumerationJson) {
  const auto data = write("t.csv", "X,Y,Z,count\n0,0,0,29\n0,0,1,48\n0,1,0,35\n0,1,1,44\n"
                                   "1,0,0,41\n1,0,1,58\n1,1,0,92\n1,1,1,153\n");
  const auto r = run("select --data " + data + " --enumerate --top 8 --json");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["num_models"], 8);
  double sum = 0;
  for (const auto& m : j["models"]) sum += m["probability"].get<double>();
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(j["models"][0]["formula"], "Z+XY");

  const auto rj = run("select --data " + data + " --iters 20000 --json");
  ASSERT_EQ(rj.code, 0);
  EXPECT_EQ(json::parse(rj.out)["models"][0]["formula"], "Z+XY");
}

TEST_F(Cli, VerifySucceeds) {
  const auto r = run("verify --max-factors 3 --max-levels 3");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(" 0 failed"), std::string::npos);
}
