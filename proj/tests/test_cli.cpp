#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "dsm/evaluation.hpp"
#include "dsm/io.hpp"

using namespace dsm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string output;
};

Run dsm_cli(const std::string& args) {
  const std::string cmd = std::string(DSM_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

const char* kStaticWorld = R"([world]
classes = 3
free = 0
dynamic = 2
scans = 3
gt_free_interval = 0.3
gt_resolution = 0.1

[sensor]
waypoint = 0 0 0 0.5
azimuth = -20 20 20
elevation = -10 10 9
max_range = 4

[static]
box = 2 -2 -1 2.5 2 2 1
)";

const char* kMovingWorld = R"([world]
classes = 3
free = 0
dynamic = 2
scans = 3
p_flip = 0.2
gt_free_interval = 0.3

[sensor]
waypoint = 0 0 0 0.5
azimuth = -20 20 20
elevation = -10 10 9
max_range = 4

[static]
box = 2 -2 -1 2.5 2 2 1

[dynamic]
size = 0.3 0.3 0.3
label = 2
waypoint = 0 1 -0.4 0.3
waypoint = 2 1 0.2 0.3
)";

const char* kConfig = R"([map]
resolution = 0.1
free_sample_interval = 0.3

[kernel]
l_s = 0.1
)";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("dsm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write(dir_ / "static.world", kStaticWorld);
    write(dir_ / "moving.world", kMovingWorld);
    write(dir_ / "map.ini", kConfig);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string p(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, Version) {
  const auto r = dsm_cli("version");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.output.rfind("dsm ", 0), 0u);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_NE(dsm_cli("").status, 0);
  EXPECT_NE(dsm_cli("frobnicate").status, 0);
  EXPECT_NE(dsm_cli("eval --map a --gt b --mode bogus").status, 0);
}

TEST_F(Cli, SimulateWritesOneScanPerFrame) {
  ASSERT_EQ(dsm_cli("simulate --world " + p("moving.world") + " --out " + p("a") + " --seed 1").status, 0);
  int scans = 0, gtp = 0, gtv = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "a")) {
    const auto n = e.path().filename().string();
    scans += n.rfind("scan_", 0) == 0;
    gtp += n.rfind("gt_points_", 0) == 0;
    gtv += n.rfind("gt_voxels_", 0) == 0;
  }
  EXPECT_EQ(scans, 3);
  EXPECT_EQ(gtp, 3);
  EXPECT_EQ(gtv, 3);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "registry.txt"));
}

TEST_F(Cli, SimulateIsDeterministic) {
  ASSERT_EQ(dsm_cli("simulate --world " + p("moving.world") + " --out " + p("a") + " --seed 5").status, 0);
  ASSERT_EQ(dsm_cli("simulate --world " + p("moving.world") + " --out " + p("b") + " --seed 5").status, 0);
  ASSERT_EQ(dsm_cli("simulate --world " + p("moving.world") + " --out " + p("c") + " --seed 6").status, 0);
  bool any_diff = false;
  for (const auto& e : fs::directory_iterator(dir_ / "a")) {
    const auto name = e.path().filename();
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / name)) << name;
    if (name.string().rfind("scan_", 0) == 0) any_diff = any_diff || slurp(e.path()) != slurp(dir_ / "c" / name);
  }
  EXPECT_TRUE(any_diff);
}

TEST_F(Cli, SimulateBinaryScansMap) {
  ASSERT_EQ(dsm_cli("simulate --binary --no-voxel-gt --world " + p("static.world") + " --out " + p("a")).status, 0);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "scan_000000.dsmb"));
  EXPECT_FALSE(fs::exists(dir_ / "a" / "gt_voxels_000000.gt"));
  EXPECT_EQ(dsm_cli("map " + p("a") + " --config " + p("map.ini") + " --out " + p("m.map")).status, 0);
}

TEST_F(Cli, SimulateErrors) {
  write(dir_ / "bad.world", "[world]\nclasses = 3\nfree = 0\ndynamic = 2\n[sensor]\nwaypoint = 0 0 0\n");
  auto r = dsm_cli("simulate --world " + p("bad.world") + " --out " + p("a"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("bad.world:6:"), std::string::npos) << r.output;
  write(dir_ / "blocker", "");
  r = dsm_cli("simulate --world " + p("static.world") + " --out " + p("blocker") + "/sub");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("blocker"), std::string::npos) << r.output;
}

TEST_F(Cli, StaticBaselineMatchesDefaultOnStaticWorld) {
  ASSERT_EQ(dsm_cli("simulate --no-voxel-gt --world " + p("static.world") + " --out " + p("a")).status, 0);
  ASSERT_EQ(dsm_cli("map " + p("a") + " --config " + p("map.ini") + " --out " + p("d.map")).status, 0);
  ASSERT_EQ(dsm_cli("map " + p("a") + " --config " + p("map.ini") + " --static-baseline --out " + p("s.map")).status, 0);
  EXPECT_EQ(slurp(dir_ / "d.map"), slurp(dir_ / "s.map"));
}

TEST_F(Cli, MapErrors) {
  ASSERT_EQ(dsm_cli("simulate --no-voxel-gt --world " + p("moving.world") + " --out " + p("a")).status, 0);
  fs::remove(dir_ / "a" / "scan_000001.dsm");
  auto r = dsm_cli("map " + p("a") + " --out " + p("m.map"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("scan_000002.dsm: missing frames"), std::string::npos) << r.output;

  fs::copy_file(dir_ / "a" / "scan_000000.dsm", dir_ / "a" / "scan_000003.dsm");
  fs::remove(dir_ / "a" / "scan_000002.dsm");
  r = dsm_cli("map " + p("a") + " --out " + p("m.map"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("scan_000003.dsm: time index 0 does not follow 0"), std::string::npos) << r.output;

  fs::remove(dir_ / "a" / "scan_000003.dsm");
  write(dir_ / "other.ini", "[classes]\nclasses = 4\nfree = 0\ndynamic = 3\n");
  r = dsm_cli("map " + p("a") + " --config " + p("other.ini") + " --out " + p("m.map"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("registry.txt: class registry does not match"), std::string::npos) << r.output;

  r = dsm_cli("map " + p("nowhere") + " --out " + p("m.map"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("nowhere: scan directory does not exist"), std::string::npos) << r.output;
}

TEST_F(Cli, AccuracyOfNoiseFreeSelfMap) {
  write(dir_ / "clean.world", std::string(kStaticWorld));
  ASSERT_EQ(dsm_cli("simulate --world " + p("clean.world") + " --out " + p("a")).status, 0);
  ASSERT_EQ(dsm_cli("map " + p("a") + " --config " + p("map.ini") + " --out " + p("m.map")).status, 0);
  const auto r = dsm_cli("eval --map " + p("m.map") + " --gt " + p("a/gt_points_000002.gt") + " --scan " +
                         p("a/scan_000002.dsm") + " --mode accuracy --report " + p("acc.csv"));
  ASSERT_EQ(r.status, 0) << r.output;
  const std::string csv = slurp(dir_ / "acc.csv");
  EXPECT_NE(csv.find("__mean__,,,,,,1\n"), std::string::npos) << csv;

  const auto v = dsm_cli("eval --map " + p("m.map") + " --gt " + p("a/gt_voxels_000002.gt") + " --scan " +
                         p("a/scan_000002.dsm") + " --mode accuracy");
  EXPECT_NE(v.status, 0);
  EXPECT_NE(v.output.find("gt_voxels_000002.gt: map accuracy needs point-set ground truth"), std::string::npos)
      << v.output;
}

TEST_F(Cli, CompletenessReport) {
  ASSERT_EQ(dsm_cli("simulate --world " + p("static.world") + " --out " + p("a")).status, 0);
  ASSERT_EQ(dsm_cli("map " + p("a") + " --config " + p("map.ini") + " --out " + p("m.map")).status, 0);
  const auto r = dsm_cli("eval --map " + p("m.map") + " --gt " + p("a/gt_voxels_000002.gt") + " --scan " +
                         p("a/scan_000002.dsm") + " --mode completeness --margin 0.06");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(r.output.rfind("set,class,tp,fp,fn,precision,recall,iou\nvisible,0,", 0), 0u) << r.output;
  EXPECT_NE(r.output.find("occluded,__mean__"), std::string::npos);
}

TEST_F(Cli, SegmentationMatchesLibrary) {
  ASSERT_EQ(dsm_cli("simulate --no-voxel-gt --world " + p("moving.world") + " --out " + p("a") + " --seed 3").status, 0);
  ASSERT_EQ(dsm_cli("map " + p("a") + " --config " + p("map.ini") + " --out " + p("m.map")).status, 0);
  const auto r = dsm_cli("eval --map " + p("m.map") + " --gt " + p("a/gt_points_000002.gt") + " --scan " +
                         p("a/scan_000002.dsm") + " --mode segmentation");
  ASSERT_EQ(r.status, 0) << r.output;

  const auto map = io::load_map(dir_ / "m.map");
  const auto frame = io::load_scan(dir_ / "a" / "scan_000002.dsm");
  const auto gt = io::load_ground_truth(dir_ / "a" / "gt_points_000002.gt");
  std::vector<ClassId> labels;
  for (std::size_t i = 0; i < frame.points.size(); ++i) labels.push_back(gt.points[i].label);
  std::stringstream want;
  io::write_report_csv(want, segmentation_eval(map, frame, labels));
  EXPECT_EQ(r.output, want.str());
}

TEST_F(Cli, EvalRegistryMismatch) {
  ASSERT_EQ(dsm_cli("simulate --no-voxel-gt --world " + p("static.world") + " --out " + p("a")).status, 0);
  ASSERT_EQ(dsm_cli("map " + p("a") + " --config " + p("map.ini") + " --out " + p("m.map")).status, 0);
  write(dir_ / "g.gt", "dsm-gt v1 mode=points t=0 classes=4 free=0 dynamic=3 n=1\n0 0 0 1\n");
  const auto r = dsm_cli("eval --map " + p("m.map") + " --gt " + p("g.gt") + " --scan " + p("a/scan_000000.dsm") +
                         " --mode accuracy");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("g.gt: class registry does not match"), std::string::npos) << r.output;
  const auto s = dsm_cli("eval --map " + p("m.map") + " --gt " + p("a/gt_points_000000.gt") + " --mode accuracy");
  EXPECT_NE(s.status, 0);
  EXPECT_NE(s.output.find("needs --scan"), std::string::npos) << s.output;
}
