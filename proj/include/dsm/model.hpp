#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace dsm {

using Vec3 = Eigen::Vector3d;
using ClassId = int;
using TimeIndex = std::int64_t;

// The label universe: K classes, one of which is "free", plus the subset of
// classes that can move.
class ClassRegistry {
 public:
  ClassRegistry(int num_classes, ClassId free_class, std::vector<ClassId> dynamic_classes);

  int num_classes() const { return num_classes_; }
  ClassId free_class() const { return free_class_; }
  // Sorted, duplicate free.
  const std::vector<ClassId>& dynamic_classes() const { return dynamic_; }

  bool is_valid(ClassId c) const { return c >= 0 && c < num_classes_; }
  bool is_dynamic(ClassId c) const { return is_valid(c) && dynamic_mask_[static_cast<std::size_t>(c)]; }
  bool is_free(ClassId c) const { return c == free_class_; }
  // Occupied and not in the dynamic set.
  bool is_static(ClassId c) const { return is_valid(c) && !is_dynamic(c) && !is_free(c); }

  bool operator==(const ClassRegistry& other) const {
    return num_classes_ == other.num_classes_ && free_class_ == other.free_class_ && dynamic_ == other.dynamic_;
  }

 private:
  int num_classes_;
  ClassId free_class_;
  std::vector<ClassId> dynamic_;
  std::vector<bool> dynamic_mask_;
};

struct PointSample {
  Vec3 position = Vec3::Zero();
  ClassId label = 0;
  // Displacement over one scan interval, meters.
  Vec3 flow = Vec3::Zero();
};

struct TrainingFrame {
  TimeIndex time_index = 0;
  Vec3 sensor_origin = Vec3::Zero();
  std::vector<PointSample> points;

  // Throws std::invalid_argument if the frame is empty, carries an invalid
  // label, or has non-finite coordinates.
  void validate(const ClassRegistry& registry) const;
};

struct VoxelKey {
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::int32_t iz = 0;

  auto operator<=>(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    // Large primes spatial hash.
    const auto x = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.ix));
    const auto y = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.iy));
    const auto z = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.iz));
    std::uint64_t h = x * 73856093ULL ^ y * 19349663ULL ^ z * 83492791ULL;
    h ^= h >> 29;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 32;
    return static_cast<std::size_t>(h);
  }
};

struct VoxelState {
  Eigen::VectorXd alpha;
  Eigen::VectorXd voxel_flow;
  TimeIndex last_time = -1;

  static VoxelState fresh(int num_classes, double prior_alpha);
  bool valid() const;
};

struct KernelParams {
  double l_s = 0.15;
  double sigma_s = 0.2;
  double l1 = 0.2;
  double sigma1 = 50.0;
  double l_free = 0.2;
  double sigma_free = 50.0;

  void validate() const;
};

struct MapConfig {
  double resolution = 0.05;
  double prior_alpha = 0.001;
  KernelParams kernel;
  double filter_lambda = 0.5;
  double flow_floor = 1e-3;
  double free_sample_interval = 0.5;

  void validate() const;

  // Ablation-study parameters (map resolution 0.05).
  static MapConfig ablation();
  // Outdoor driving parameters at 0.1 m.
  static MapConfig outdoor();
  // Same profile with every length rescaled to a new map resolution.
  MapConfig scaled_to(double new_resolution) const;
};

VoxelKey voxel_key_of(const Vec3& position, double resolution);
Vec3 voxel_center(const VoxelKey& key, double resolution);
// Order: -x, +x, -y, +y, -z, +z.
std::array<VoxelKey, 6> neighbor_keys(const VoxelKey& key);

// Point indices of a frame bucketed by voxel.
class VoxelBuckets {
 public:
  VoxelBuckets(std::span<const PointSample> points, double resolution);

  // Indices into points() of the samples in one voxel, in input order.
  std::span<const std::uint32_t> at(const VoxelKey& key) const;
  // Keys in lexicographic order.
  const std::vector<VoxelKey>& keys() const { return keys_; }
  // Half-open range of keys() sharing (ix, iy).
  std::pair<std::size_t, std::size_t> column(std::int32_t ix, std::int32_t iy) const;
  // Copies of the samples in keys()[k], in input order.
  std::span<const PointSample> bucket(std::size_t k) const;
  std::span<const PointSample> points() const { return points_; }
  double resolution() const { return resolution_; }

 private:
  static std::uint64_t column_id(std::int32_t ix, std::int32_t iy) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 32) | static_cast<std::uint32_t>(iy);
  }

  std::span<const PointSample> points_;
  double resolution_;
  std::vector<VoxelKey> keys_;
  std::vector<std::uint32_t> starts_;
  std::vector<std::uint32_t> order_;
  std::vector<PointSample> sorted_;
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> columns_;
};

}  // namespace dsm
