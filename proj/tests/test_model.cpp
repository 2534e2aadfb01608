#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dsm/model.hpp"
#include "oracles.hpp"

using namespace dsm;

TEST(ClassRegistry, Invariants) {
  EXPECT_THROW(ClassRegistry(1, 0, {}), std::invalid_argument);
  EXPECT_THROW(ClassRegistry(3, 0, {0}), std::invalid_argument);
  EXPECT_THROW(ClassRegistry(3, 0, {3}), std::invalid_argument);
  EXPECT_THROW(ClassRegistry(3, 3, {}), std::invalid_argument);
  const ClassRegistry r(4, 0, {3, 2, 3});
  EXPECT_EQ(r.dynamic_classes(), (std::vector<ClassId>{2, 3}));
  EXPECT_TRUE(r.is_free(0));
  EXPECT_TRUE(r.is_static(1));
  EXPECT_FALSE(r.is_static(0));
  EXPECT_FALSE(r.is_static(2));
  EXPECT_TRUE(r.is_dynamic(3));
  EXPECT_FALSE(r.is_valid(4));
  EXPECT_FALSE(r.is_valid(-1));
}

TEST(TrainingFrame, Validate) {
  const ClassRegistry r(3, 0, {2});
  TrainingFrame f;
  EXPECT_THROW(f.validate(r), std::invalid_argument);
  f.points.push_back({Vec3(1, 2, 3), 1, Vec3::Zero()});
  EXPECT_NO_THROW(f.validate(r));
  f.points.push_back({Vec3(1, 2, 3), 3, Vec3::Zero()});
  EXPECT_THROW(f.validate(r), std::invalid_argument);
  f.points.back().label = 2;
  f.points.back().flow.x() = std::numeric_limits<double>::infinity();
  EXPECT_THROW(f.validate(r), std::invalid_argument);
}

TEST(VoxelKey, FloorArithmetic) {
  EXPECT_EQ(voxel_key_of(Vec3(1.2, -0.3, 0.0), 0.5), (VoxelKey{2, -1, 0}));
  EXPECT_EQ(voxel_key_of(Vec3(0, 0, 0), 0.1), (VoxelKey{0, 0, 0}));
  EXPECT_EQ(voxel_key_of(Vec3(0.5, 0.5, 0.5), 0.5), (VoxelKey{1, 1, 1}));
  EXPECT_THROW(voxel_key_of(Vec3(NAN, 0, 0), 0.1), std::invalid_argument);
  EXPECT_THROW(voxel_key_of(Vec3(0, 0, 0), 0.0), std::invalid_argument);
  EXPECT_THROW(voxel_key_of(Vec3(1e12, 0, 0), 0.1), std::out_of_range);
}

TEST(VoxelKey, Center) {
  EXPECT_TRUE(voxel_center({0, 0, 0}, 1.0).isApprox(Vec3(0.5, 0.5, 0.5)));
  EXPECT_TRUE(voxel_center({2, -1, 0}, 0.5).isApprox(Vec3(1.25, -0.25, 0.25)));
  EXPECT_EQ(voxel_key_of(voxel_center({7, 7, 7}, 0.3), 0.3), (VoxelKey{7, 7, 7}));
}

TEST(VoxelKey, CenterRoundTripRandom) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> c(-100000, 100000);
  std::uniform_real_distribution<double> r(1e-3, 10.0);
  for (int i = 0; i < 20000; ++i) {
    const VoxelKey k{c(rng), c(rng), c(rng)};
    const double res = r(rng);
    ASSERT_EQ(voxel_key_of(voxel_center(k, res), res), k);
  }
}

TEST(VoxelKey, Neighbors) {
  const auto n = neighbor_keys({0, 0, 0});
  const std::array<VoxelKey, 6> want{{{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
  EXPECT_EQ(n, want);
  const VoxelKey k{2, -1, 0};
  std::set<VoxelKey> distinct;
  for (const auto& m : neighbor_keys(k)) {
    const int d = std::abs(m.ix - k.ix) + std::abs(m.iy - k.iy) + std::abs(m.iz - k.iz);
    EXPECT_EQ(d, 1);
    distinct.insert(m);
  }
  EXPECT_EQ(distinct.size(), 6u);
  EXPECT_THROW(neighbor_keys({std::numeric_limits<std::int32_t>::max(), 0, 0}), std::overflow_error);
}

TEST(VoxelState, FreshAndValid) {
  auto s = VoxelState::fresh(3, 0.001);
  EXPECT_TRUE(s.valid());
  EXPECT_DOUBLE_EQ(s.alpha.sum(), 0.003);
  EXPECT_EQ(s.voxel_flow.norm(), 0.0);
  s.alpha[1] = 0.0;
  EXPECT_FALSE(s.valid());
  s.alpha[1] = 1.0;
  s.voxel_flow[0] = -1e-9;
  EXPECT_FALSE(s.valid());
}

TEST(MapConfig, Profiles) {
  const auto t2 = MapConfig::ablation();
  EXPECT_DOUBLE_EQ(t2.resolution, 0.05);
  EXPECT_DOUBLE_EQ(t2.kernel.l_s, 0.15);
  EXPECT_DOUBLE_EQ(t2.kernel.sigma_s, 0.2);
  EXPECT_DOUBLE_EQ(t2.kernel.l1, 0.2);
  EXPECT_DOUBLE_EQ(t2.kernel.sigma1, 50.0);
  EXPECT_DOUBLE_EQ(t2.kernel.l_free, t2.kernel.l1);
  EXPECT_DOUBLE_EQ(t2.kernel.sigma_free, t2.kernel.sigma1);
  const auto t3 = MapConfig::outdoor();
  EXPECT_DOUBLE_EQ(t3.resolution, 0.1);
  EXPECT_DOUBLE_EQ(t3.kernel.l_s, 0.1);
  EXPECT_DOUBLE_EQ(t3.kernel.l1, 2.5);
  EXPECT_DOUBLE_EQ(t3.kernel.sigma1, 100.0);
  const auto s = t2.scaled_to(0.1);
  EXPECT_DOUBLE_EQ(s.kernel.l_s, 0.3);
  EXPECT_DOUBLE_EQ(s.kernel.l1, 0.4);
  EXPECT_DOUBLE_EQ(s.kernel.sigma_s, 0.2);
  EXPECT_DOUBLE_EQ(s.free_sample_interval, 1.0);
}

TEST(MapConfig, Validate) {
  MapConfig c;
  EXPECT_NO_THROW(c.validate());
  c.prior_alpha = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MapConfig{};
  c.filter_lambda = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MapConfig{};
  c.kernel.sigma1 = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MapConfig{};
  c.free_sample_interval = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(VoxelBuckets, MatchesBruteForce) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<PointSample> pts(3000);
  for (auto& p : pts) p.position = Vec3(u(rng), u(rng), u(rng));
  const VoxelBuckets b(pts, 0.1);
  std::map<oracle::Key, std::vector<std::uint32_t>> want;
  for (std::uint32_t i = 0; i < pts.size(); ++i) want[oracle::key_of(pts[i].position, 0.1)].push_back(i);
  ASSERT_EQ(b.keys().size(), want.size());
  std::size_t k = 0;
  for (const auto& [key, idx] : want) {
    const VoxelKey vk = oracle::to_voxel_key(key);
    EXPECT_EQ(b.keys()[k], vk);
    const auto got = b.at(vk);
    EXPECT_EQ(std::vector<std::uint32_t>(got.begin(), got.end()), idx);
    const auto copies = b.bucket(k);
    ASSERT_EQ(copies.size(), idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) EXPECT_EQ(copies[j].position, pts[idx[j]].position);
    auto [cb, ce] = b.column(vk.ix, vk.iy);
    EXPECT_LE(cb, k);
    EXPECT_GT(ce, k);
    ++k;
  }
  EXPECT_TRUE(b.at({1000, 0, 0}).empty());
}
