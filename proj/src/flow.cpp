#include "dsm/flow.hpp"

#include <stdexcept>

#include "dsm/kernels.hpp"

namespace dsm {

TrainingFrame ego_compensate(const TrainingFrame& frame, const ClassRegistry& registry) {
  Vec3 sum = Vec3::Zero();
  std::size_t count = 0;
  for (const auto& p : frame.points) {
    if (registry.is_static(p.label)) {
      sum += p.flow;
      ++count;
    }
  }
  if (count == 0) {
    throw std::invalid_argument("ego compensation needs at least one static-labeled point (frame " +
                                std::to_string(frame.time_index) + ")");
  }
  const Vec3 mean = sum / static_cast<double>(count);
  TrainingFrame out = frame;
  for (auto& p : out.points) p.flow -= mean;
  return out;
}

double temporal_filter(double new_v, double prev_v, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("filter lambda must lie in (0, 1]");
  return lambda * new_v + (1.0 - lambda) * prev_v;
}

namespace {

struct RawFlow {
  Eigen::VectorXd per_class;
  double free = 0.0;
  std::size_t support = 0;
};

void accumulate(RawFlow& raw, const PointSample& p, const Vec3& center, const KernelParams& kp,
                const ClassRegistry& registry) {
  ++raw.support;
  if (!registry.is_dynamic(p.label)) return;
  const double speed = p.flow.norm();
  if (speed == 0.0) return;
  const double d = (p.position - center).norm();
  raw.per_class[p.label] += sparse_kernel(d, kp.l1, kp.sigma1) * speed;
  raw.free += sparse_kernel(d, kp.l_free, kp.sigma_free) * speed;
}

Eigen::VectorXd finish(const RawFlow& raw, const Eigen::VectorXd& prev, const MapConfig& config,
                       const ClassRegistry& registry) {
  const int K = registry.num_classes();
  if (prev.size() != K) throw std::invalid_argument("previous voxel flow has wrong dimension");
  const double inv_n = raw.support > 0 ? 1.0 / static_cast<double>(raw.support) : 0.0;
  const double lambda = config.filter_lambda;
  Eigen::VectorXd out(K);
  const ClassId free = registry.free_class();
  const double v_free = temporal_filter(raw.free * inv_n, prev[free], lambda);
  for (int k = 0; k < K; ++k) {
    out[k] = registry.is_dynamic(k) ? temporal_filter(raw.per_class[k] * inv_n, prev[k], lambda) : v_free;
  }
  return out;
}

}  // namespace

Eigen::VectorXd aggregate_flow(const TrainingFrame& frame, const VoxelKey& key, const VoxelState& prev,
                               const MapConfig& config, const ClassRegistry& registry) {
  const auto neighbors = neighbor_keys(key);
  const Vec3 center = voxel_center(key, config.resolution);
  RawFlow raw{Eigen::VectorXd::Zero(registry.num_classes())};
  for (const auto& p : frame.points) {
    const VoxelKey k = voxel_key_of(p.position, config.resolution);
    bool in_support = k == key;
    for (const auto& n : neighbors) in_support = in_support || k == n;
    if (in_support) accumulate(raw, p, center, config.kernel, registry);
  }
  return finish(raw, prev.voxel_flow, config, registry);
}

Eigen::VectorXd aggregate_flow(const VoxelBuckets& buckets, const VoxelKey& key, const Eigen::VectorXd& prev_flow,
                               const MapConfig& config, const ClassRegistry& registry) {
  const Vec3 center = voxel_center(key, config.resolution);
  RawFlow raw{Eigen::VectorXd::Zero(registry.num_classes())};
  const auto points = buckets.points();
  auto visit = [&](const VoxelKey& k) {
    for (std::uint32_t i : buckets.at(k)) accumulate(raw, points[i], center, config.kernel, registry);
  };
  visit(key);
  for (const auto& n : neighbor_keys(key)) visit(n);
  return finish(raw, prev_flow, config, registry);
}

}  // namespace dsm
