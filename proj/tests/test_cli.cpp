#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct Run
{
  int code;
  std::string out; // stdout and stderr interleaved
};

auto Cli(std::string const &args) -> Run
{
  std::string const cmd = std::string(LSM_CLI_PATH) + " " + args + " 2>&1";
  FILE *p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) { out += buf; }
  int const status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

auto Slurp(fs::path const &p) -> std::string
{
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

auto Lines(std::string const &s) -> int { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

class CliTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    dir = fs::temp_directory_path() / ("lsm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  auto p(std::string const &name) const -> std::string { return (dir / name).string(); }
  fs::path dir;
};

} // namespace

TEST_F(CliTest, UsageErrorsExitTwo)
{
  auto const none = Cli("");
  EXPECT_EQ(none.code, 2);
  EXPECT_EQ(none.out.rfind("error: ", 0), 0u) << none.out;
  EXPECT_EQ(Lines(none.out), 1);
  EXPECT_EQ(Cli("make-mask shuffling").code, 2); // --out missing
  EXPECT_EQ(Cli("bogus-command").code, 2);
}

TEST_F(CliTest, RuntimeErrorsAreOneLine)
{
  auto const r = Cli("make-mask spiral --out " + p("m.bin"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.out.rfind("error: ", 0), 0u) << r.out;
  EXPECT_NE(r.out.find("spiral"), std::string::npos);
  EXPECT_EQ(Lines(r.out), 1);

  auto const bad = Cli("simulate-dict --spec '{\"preset\":\"fse\"}' --grid '{\"t1\":1000,\"t2\":[50,-1]}' --out " + p("d.bin"));
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(Lines(bad.out), 1);
  EXPECT_FALSE(fs::exists(p("d.bin")));

  std::ofstream(p("broken.json")) << "{ not json";
  auto const js = Cli("synth --manifest " + p("broken.json") + " --out " + p("s"));
  EXPECT_EQ(js.code, 1);
  EXPECT_EQ(Lines(js.out), 1);
}

TEST_F(CliTest, DictionaryAndSubspaceAreDeterministic)
{
  std::string const grid = "'{\"t1\":1000,\"t2\":{\"lo\":50,\"hi\":400,\"step\":5}}'";
  ASSERT_EQ(Cli("simulate-dict --spec '{\"preset\":\"fse\"}' --grid " + grid + " --out " + p("a.bin")).code, 0);
  ASSERT_EQ(Cli("simulate-dict --spec '{\"preset\":\"fse\"}' --grid " + grid + " --out " + p("b.bin")).code, 0);
  EXPECT_EQ(Slurp(p("a.bin")), Slurp(p("b.bin")));
  EXPECT_NE(Slurp(p("a.bin.config.json")).find("\"command\""), std::string::npos);

  ASSERT_EQ(Cli("fit-subspace --dict " + p("a.bin") + " -B 3 --out " + p("s.bin")).code, 0);
  ASSERT_EQ(Cli("compress-eval --dict " + p("a.bin") + " -B 1,2,3 --out " + p("c.csv")).code, 0);
  auto const csv = Slurp(p("c.csv"));
  EXPECT_EQ(Lines(csv), 4) << csv;
}

TEST_F(CliTest, SynthAndReconRoundTrip)
{
  std::ofstream(p("m.json")) << R"({
    "data": {"M": 32, "N": 32, "coils": {"count": 2}, "mask": {"kind": "shuffling", "shots": 4},
             "noise": {"relative": 0.001}, "seed": 3},
    "dictionary": {"grid": {"t1": 1000, "t2": {"lo": 50, "hi": 400, "step": 5}}},
    "subspace": {"rank": 2},
    "recon": {"iters": 5}
  })";
  ASSERT_EQ(Cli("synth --manifest " + p("m.json") + " --out " + p("s1")).code, 0);
  ASSERT_EQ(Cli("synth --manifest " + p("m.json") + " --out " + p("s2")).code, 0);
  for (auto f : {"kspace.bin", "truth.bin", "mask.bin", "coils.bin", "phantom.bin"}) {
    EXPECT_EQ(Slurp(dir / "s1" / f), Slurp(dir / "s2" / f)) << f;
  }
  auto const r = Cli("recon linear --manifest " + p("m.json") + " -B 2 --out " + p("r"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto const metrics = Slurp(dir / "r" / "metrics.csv");
  EXPECT_EQ(metrics.rfind("echo_index,nrmse\n", 0), 0u);
  EXPECT_EQ(Lines(metrics), 81);
  EXPECT_EQ(Lines(Slurp(dir / "r" / "objective.csv")), 7);
  EXPECT_TRUE(fs::exists(dir / "r" / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "r" / "config.json"));

  auto const missing = Cli("recon latent --manifest " + p("m.json") + " --out " + p("r2"));
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(Lines(missing.out), 1);
}
