#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fovs/cli/app.hpp"
#include "fovs/dataset.hpp"

namespace fovs::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("fovs_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Outputs captured from the first correct build. Regenerate with
// `fovs synth --out DIR --duration 2 --density 0.1 --seed 42` if the generator changes on purpose.
TEST_F(Cli, SynthMatchesGoldenFiles) {
  ASSERT_EQ(call({"synth", "--out", path("g"), "--duration", "2", "--density", "0.1", "--seed", "42"}).code, 0);
  const fs::path golden = FOVS_GOLDEN_DIR;
  EXPECT_EQ(slurp(dir_ / "g" / "trajectory.csv"), slurp(golden / "trajectory.csv"));
  EXPECT_EQ(slurp(dir_ / "g" / "gaze.csv"), slurp(golden / "gaze.csv"));
  const auto points = slurp(dir_ / "g" / "points.csv");
  std::istringstream digest(slurp(golden / "points.digest"));
  std::size_t lines = 0;
  std::string hash;
  digest >> lines >> hash;
  EXPECT_EQ(static_cast<std::size_t>(std::count(points.begin(), points.end(), '\n')), lines);
  EXPECT_EQ(fnv1a(points), hash);
}

TEST_F(Cli, NoArgumentsPrintsUsage) {
  const auto r = call({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE((r.out + r.err).find("synth"), std::string::npos);
}

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(call({"--help"}).code, 0); }

TEST_F(Cli, UnknownFlagIsUsageError) {
  const auto r = call({"synth", "--out", path("s"), "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
  EXPECT_EQ(call({"frobnicate"}).code, 2);
  EXPECT_EQ(call({"synth"}).code, 2);
}

TEST_F(Cli, RuntimeFailureExitsOne) {
  std::ofstream(path("bad.fovs")) << "not an archive";
  const auto r = call({"eval", "--archive", path("bad.fovs"), "--baseline", "persistence"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST_F(Cli, SynthCurateEvalPipeline) {
  ASSERT_EQ(call({"synth", "--out", path("s"), "--duration", "8", "--density", "0.3"}).code, 0);
  for (const char* f : {"points.csv", "trajectory.csv", "gaze.csv"}) EXPECT_TRUE(fs::exists(dir_ / "s" / f));
  const std::vector<std::string> streams = {"--points", path("s/points.csv"), "--trajectory", path("s/trajectory.csv"),
                                            "--gaze", path("s/gaze.csv")};
  auto curate = std::vector<std::string>{"curate", "--out", path("a.fovs")};
  curate.insert(curate.end(), streams.begin(), streams.end());
  ASSERT_EQ(call(curate).code, 0);
  const auto archive = read_archive(path("a.fovs"));
  EXPECT_EQ(archive.samples.size(), expected_window_count(8.0, archive.spec));

  const auto r = call({"eval", "--archive", path("a.fovs"), "--baseline", "persistence", "--split", "all",
                       "--report-format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["sample_count"], archive.samples.size());
  EXPECT_TRUE(j["levels"].contains("foveal"));

  auto lift = std::vector<std::string>{"lift", "--out", path("lift.csv")};
  lift.insert(lift.end(), streams.begin(), streams.end());
  ASSERT_EQ(call(lift).code, 0);
  EXPECT_EQ(slurp(path("lift.csv")).rfind("sample_time,part,frame,channel,count,cells", 0), 0u);
}

TEST_F(Cli, ConfigFileSuppliesFlags) {
  std::ofstream(path("c.cfg")) << "# synth settings\nduration = 3\ndensity = 0.2\n";
  ASSERT_EQ(call({"synth", "--config", path("c.cfg"), "--out", path("s")}).code, 0);
  const auto poses = read_trajectory(dir_ / "s" / "trajectory.csv");
  EXPECT_EQ(poses.size(), 30u);
  // Command-line flags win over the file.
  ASSERT_EQ(call({"synth", "--config", path("c.cfg"), "--out", path("s2"), "--duration", "2"}).code, 0);
  EXPECT_EQ(read_trajectory(dir_ / "s2" / "trajectory.csv").size(), 20u);
}

TEST_F(Cli, ConfigUnknownKeyIsUsageError) {
  std::ofstream(path("c.cfg")) << "durration = 3\n";
  const auto r = call({"synth", "--config", path("c.cfg"), "--out", path("s")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("durration"), std::string::npos);
}

TEST_F(Cli, SameSeedSameStreams) {
  ASSERT_EQ(call({"synth", "--out", path("a"), "--duration", "2", "--density", "0.2", "--outlier-rate", "0.02"}).code, 0);
  ASSERT_EQ(call({"synth", "--out", path("b"), "--duration", "2", "--density", "0.2", "--outlier-rate", "0.02"}).code, 0);
  for (const char* f : {"points.csv", "trajectory.csv", "gaze.csv"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST(Bench, StageSummary) {
  const auto s = summarize_stage("x", {4.0, 1.0, 3.0, 2.0});
  EXPECT_DOUBLE_EQ(s.mean_ms, 2.5);
  EXPECT_DOUBLE_EQ(s.std_ms, std::sqrt(1.25));
  EXPECT_EQ(s.p95_ms, 4.0);
  EXPECT_THROW(summarize_stage("x", {}), std::invalid_argument);
}

TEST(Bench, TotalIsSumOfStagesAndMorePointsCostMore) {
  BenchOptions o;
  o.density_scale = 0.5;
  o.windows = 100;
  o.warmup = 2;
  const auto small = run_bench(o);
  ASSERT_EQ(small.stages.size(), 4u);
  EXPECT_EQ(small.windows, 100u);
  double sum = 0.0;
  for (const auto& s : small.stages) sum += s.mean_ms;
  EXPECT_NEAR(small.total_mean_ms, sum, 1e-9);
  EXPECT_DOUBLE_EQ(small.real_time_factor, small.total_mean_ms / 2000.0);
  const auto j = nlohmann::json::parse(latency_json(small));
  EXPECT_EQ(j["stages"].size(), 4u);
  EXPECT_NE(latency_table(small).find("real-time factor"), std::string::npos);

  o.density_scale = 1.0;
  const auto large = run_bench(o);
  EXPECT_GT(large.scene_points, small.scene_points);
  EXPECT_GT(large.stages[0].mean_ms, small.stages[0].mean_ms);
}

TEST(Bench, TooFewWindowsIsRejected) {
  const auto r = call({"bench", "--windows", "10"});
  EXPECT_EQ(r.code, 2);
}

}  // namespace
}  // namespace fovs::cli
