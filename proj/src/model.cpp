#include "dsm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dsm {

ClassRegistry::ClassRegistry(int num_classes, ClassId free_class, std::vector<ClassId> dynamic_classes)
    : num_classes_(num_classes), free_class_(free_class), dynamic_(std::move(dynamic_classes)) {
  if (num_classes_ < 2) throw std::invalid_argument("class registry needs at least 2 classes");
  if (!is_valid(free_class_)) throw std::invalid_argument("free class id out of range");
  std::sort(dynamic_.begin(), dynamic_.end());
  dynamic_.erase(std::unique(dynamic_.begin(), dynamic_.end()), dynamic_.end());
  dynamic_mask_.assign(static_cast<std::size_t>(num_classes_), false);
  for (ClassId q : dynamic_) {
    if (!is_valid(q)) throw std::invalid_argument("dynamic class id " + std::to_string(q) + " out of range");
    if (q == free_class_) throw std::invalid_argument("free class cannot be dynamic");
    dynamic_mask_[static_cast<std::size_t>(q)] = true;
  }
}

void TrainingFrame::validate(const ClassRegistry& registry) const {
  if (time_index < 0) throw std::invalid_argument("negative time index");
  if (points.empty()) throw std::invalid_argument("frame " + std::to_string(time_index) + " has no points");
  if (!sensor_origin.allFinite()) throw std::invalid_argument("non-finite sensor origin");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!registry.is_valid(p.label)) {
      throw std::invalid_argument("point " + std::to_string(i) + " has label " + std::to_string(p.label) +
                                  " outside [0, " + std::to_string(registry.num_classes()) + ")");
    }
    if (!p.position.allFinite() || !p.flow.allFinite()) {
      throw std::invalid_argument("point " + std::to_string(i) + " has non-finite coordinates");
    }
  }
}

VoxelState VoxelState::fresh(int num_classes, double prior_alpha) {
  VoxelState s;
  s.alpha = Eigen::VectorXd::Constant(num_classes, prior_alpha);
  s.voxel_flow = Eigen::VectorXd::Zero(num_classes);
  return s;
}

bool VoxelState::valid() const {
  return alpha.size() == voxel_flow.size() && alpha.allFinite() && (alpha.array() > 0.0).all() &&
         voxel_flow.allFinite() && (voxel_flow.array() >= 0.0).all();
}

void KernelParams::validate() const {
  if (!(l_s > 0 && l1 > 0 && l_free > 0)) throw std::invalid_argument("kernel lengths must be positive");
  if (!(sigma_s > 0 && sigma1 > 0 && sigma_free > 0)) throw std::invalid_argument("kernel scales must be positive");
}

void MapConfig::validate() const {
  if (!(resolution > 0)) throw std::invalid_argument("resolution must be positive");
  if (!(prior_alpha > 0)) throw std::invalid_argument("prior_alpha must be positive");
  if (!(free_sample_interval > 0)) throw std::invalid_argument("free_sample_interval must be positive");
  if (!(filter_lambda > 0 && filter_lambda <= 1)) throw std::invalid_argument("filter_lambda must lie in (0, 1]");
  if (!(flow_floor >= 0)) throw std::invalid_argument("flow_floor must be non-negative");
  kernel.validate();
}

MapConfig MapConfig::ablation() { return MapConfig{}; }

MapConfig MapConfig::outdoor() {
  MapConfig c;
  c.resolution = 0.1;
  c.kernel.l_s = 0.1;
  c.kernel.l1 = 2.5;
  c.kernel.sigma1 = 100.0;
  c.kernel.l_free = 2.5;
  c.kernel.sigma_free = 100.0;
  c.free_sample_interval = 1.5;
  return c;
}

MapConfig MapConfig::scaled_to(double new_resolution) const {
  if (!(new_resolution > 0)) throw std::invalid_argument("resolution must be positive");
  const double f = new_resolution / resolution;
  MapConfig c = *this;
  c.resolution = new_resolution;
  c.kernel.l_s *= f;
  c.kernel.l1 *= f;
  c.kernel.l_free *= f;
  c.free_sample_interval *= f;
  return c;
}

namespace {

std::int32_t checked_floor(double v) {
  const double f = std::floor(v);
  if (!std::isfinite(f) || f < static_cast<double>(std::numeric_limits<std::int32_t>::min()) ||
      f > static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
    throw std::out_of_range("voxel coordinate outside the representable grid");
  }
  return static_cast<std::int32_t>(f);
}

}  // namespace

VoxelKey voxel_key_of(const Vec3& position, double resolution) {
  if (!(resolution > 0)) throw std::invalid_argument("resolution must be positive");
  if (!position.allFinite()) throw std::invalid_argument("non-finite position");
  return {checked_floor(position.x() / resolution), checked_floor(position.y() / resolution),
          checked_floor(position.z() / resolution)};
}

Vec3 voxel_center(const VoxelKey& key, double resolution) {
  return (Vec3(key.ix, key.iy, key.iz).array() + 0.5).matrix() * resolution;
}

std::array<VoxelKey, 6> neighbor_keys(const VoxelKey& key) {
  constexpr auto lo = std::numeric_limits<std::int32_t>::min();
  constexpr auto hi = std::numeric_limits<std::int32_t>::max();
  for (std::int32_t c : {key.ix, key.iy, key.iz}) {
    if (c == lo || c == hi) throw std::overflow_error("neighbor key overflows the grid");
  }
  return {{{key.ix - 1, key.iy, key.iz},
           {key.ix + 1, key.iy, key.iz},
           {key.ix, key.iy - 1, key.iz},
           {key.ix, key.iy + 1, key.iz},
           {key.ix, key.iy, key.iz - 1},
           {key.ix, key.iy, key.iz + 1}}};
}

VoxelBuckets::VoxelBuckets(std::span<const PointSample> points, double resolution)
    : points_(points), resolution_(resolution) {
  std::vector<std::pair<VoxelKey, std::uint32_t>> tagged;
  tagged.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    tagged.emplace_back(voxel_key_of(points[i].position, resolution), static_cast<std::uint32_t>(i));
  }
  // Stable order within a bucket keeps floating-point sums reproducible.
  std::stable_sort(tagged.begin(), tagged.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  order_.reserve(tagged.size());
  sorted_.reserve(tagged.size());
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    if (i == 0 || tagged[i].first != tagged[i - 1].first) {
      keys_.push_back(tagged[i].first);
      starts_.push_back(static_cast<std::uint32_t>(i));
    }
    order_.push_back(tagged[i].second);
    sorted_.push_back(points[tagged[i].second]);
  }
  starts_.push_back(static_cast<std::uint32_t>(tagged.size()));
  for (std::size_t k = 0; k < keys_.size();) {
    std::size_t e = k;
    while (e < keys_.size() && keys_[e].ix == keys_[k].ix && keys_[e].iy == keys_[k].iy) ++e;
    columns_.emplace(column_id(keys_[k].ix, keys_[k].iy),
                     std::make_pair(static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(e)));
    k = e;
  }
}

std::pair<std::size_t, std::size_t> VoxelBuckets::column(std::int32_t ix, std::int32_t iy) const {
  auto it = columns_.find(column_id(ix, iy));
  if (it == columns_.end()) return {0, 0};
  return it->second;
}

std::span<const PointSample> VoxelBuckets::bucket(std::size_t k) const {
  return std::span<const PointSample>(sorted_).subspan(starts_[k], starts_[k + 1] - starts_[k]);
}

std::span<const std::uint32_t> VoxelBuckets::at(const VoxelKey& key) const {
  const auto [b, e] = column(key.ix, key.iy);
  auto it = std::lower_bound(keys_.begin() + static_cast<std::ptrdiff_t>(b),
                             keys_.begin() + static_cast<std::ptrdiff_t>(e), key);
  if (it == keys_.begin() + static_cast<std::ptrdiff_t>(e) || *it != key) return {};
  const auto k = static_cast<std::size_t>(it - keys_.begin());
  return std::span<const std::uint32_t>(order_).subspan(starts_[k], starts_[k + 1] - starts_[k]);
}

}  // namespace dsm
