#include "dsm/mapper.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <thread>

#include "dsm/flow.hpp"
#include "dsm/kernels.hpp"

namespace dsm {

SemanticMap::SemanticMap(MapConfig config, ClassRegistry registry)
    : config_(std::move(config)), registry_(std::move(registry)) {
  config_.validate();
}

const VoxelState* SemanticMap::find(const VoxelKey& key) const {
  auto it = voxels_.find(key);
  return it == voxels_.end() ? nullptr : &it->second;
}

std::vector<VoxelKey> SemanticMap::sorted_keys() const {
  std::vector<VoxelKey> keys;
  keys.reserve(voxels_.size());
  for (const auto& [k, _] : voxels_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

void SemanticMap::insert(const VoxelKey& key, VoxelState state) {
  if (state.alpha.size() != registry_.num_classes()) throw std::invalid_argument("voxel state has wrong dimension");
  if (!state.valid()) throw std::invalid_argument("voxel state violates alpha > 0 / flow >= 0");
  voxels_.insert_or_assign(key, std::move(state));
}

VoxelState predict_with_flow(const VoxelState& state, const Eigen::VectorXd& flow, double flow_floor) {
  VoxelState out = state;
  out.alpha = state.alpha.cwiseProduct(transition_weights(flow, flow_floor))
                  .cwiseMax(std::numeric_limits<double>::min());
  return out;
}

VoxelState predict(const VoxelState& state, const MapConfig& config) {
  return predict_with_flow(state, state.voxel_flow, config.flow_floor);
}

VoxelState update(const VoxelState& state, const VoxelKey& key, const TrainingFrame& frame, const MapConfig& config,
                  const ClassRegistry& registry) {
  VoxelState out = state;
  const Vec3 center = voxel_center(key, config.resolution);
  for (const auto& p : frame.points) {
    if (!registry.is_valid(p.label)) throw std::invalid_argument("frame label outside the class registry");
    const double w = spatial_weight(p.position, center, config.kernel);
    if (w > 0.0) out.alpha[p.label] += w;
  }
  return out;
}

MapEstimate map_label(const VoxelState& state) {
  const auto& a = state.alpha;
  const Eigen::Index K = a.size();
  MapEstimate est;
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < K; ++k) {
    if (a[k] > a[best]) best = k;
  }
  est.label = static_cast<ClassId>(best);
  if (a.minCoeff() > 1.0) {
    est.theta = (a.array() - 1.0) / (a.sum() - static_cast<double>(K));
  } else {
    est.theta = a / a.sum();
  }
  return est;
}

std::vector<PointSample> free_space_samples(const Vec3& origin, const Vec3& endpoint, double interval,
                                            const ClassRegistry& registry) {
  if (!(interval > 0)) throw std::invalid_argument("free-space sampling interval must be positive");
  const Vec3 delta = endpoint - origin;
  const double range = delta.norm();
  if (!(range > 0)) throw std::invalid_argument("zero-length ray");
  const Vec3 dir = delta / range;
  std::vector<PointSample> out;
  for (int k = 1;; ++k) {
    const double s = k * interval;
    if (!(s < range)) break;
    out.push_back({origin + s * dir, registry.free_class(), Vec3::Zero()});
  }
  return out;
}

TrainingFrame prepare_frame(const TrainingFrame& frame, const MapConfig& config, const ClassRegistry& registry,
                            const StepOptions& options) {
  TrainingFrame out = options.ego_compensation ? ego_compensate(frame, registry) : frame;
  if (options.free_sampling) {
    const std::size_t n = out.points.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 endpoint = out.points[i].position;
      if (endpoint == out.sensor_origin) continue;
      auto samples = free_space_samples(out.sensor_origin, endpoint, config.free_sample_interval, registry);
      out.points.insert(out.points.end(), samples.begin(), samples.end());
    }
  }
  return out;
}

std::vector<VoxelKey> active_keys(const TrainingFrame& prepared, double resolution) {
  std::vector<VoxelKey> keys;
  keys.reserve(prepared.points.size());
  for (const auto& p : prepared.points) keys.push_back(voxel_key_of(p.position, resolution));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

namespace {

// Columns (dx, dy) and their z reach covering every cell that can hold a
// point within l_s of a voxel center.
struct StencilColumn {
  std::int32_t dx, dy, dz;
};

std::vector<StencilColumn> spatial_stencil(const MapConfig& config) {
  const double r = config.kernel.l_s / config.resolution;
  const auto reach = static_cast<std::int32_t>(std::ceil(r + 0.5));
  auto gap = [](std::int32_t d) { return std::max(0.0, std::abs(d) - 0.5); };
  std::vector<StencilColumn> columns;
  for (std::int32_t x = -reach; x <= reach; ++x) {
    for (std::int32_t y = -reach; y <= reach; ++y) {
      const double rest = r * r - gap(x) * gap(x) - gap(y) * gap(y);
      if (rest <= 0) continue;
      std::int32_t z = 0;
      while (gap(z + 1) * gap(z + 1) < rest) ++z;
      columns.push_back({x, y, z});
    }
  }
  return columns;
}

void accumulate_spatial(Eigen::VectorXd& alpha, const VoxelBuckets& buckets, const VoxelKey& key,
                        const std::vector<StencilColumn>& stencil, const MapConfig& config) {
  const double ls = config.kernel.l_s;
  const double ls2 = ls * ls;
  const Vec3 center = voxel_center(key, config.resolution);
  const auto& keys = buckets.keys();
  for (const auto& c : stencil) {
    auto [b, e] = buckets.column(key.ix + c.dx, key.iy + c.dy);
    const std::int64_t zlo = static_cast<std::int64_t>(key.iz) - c.dz;
    const std::int64_t zhi = static_cast<std::int64_t>(key.iz) + c.dz;
    while (b < e && keys[b].iz < zlo) ++b;
    for (; b < e && keys[b].iz <= zhi; ++b) {
      for (const auto& p : buckets.bucket(b)) {
        const double d2 = (p.position - center).squaredNorm();
        if (d2 >= ls2) continue;
        alpha[p.label] += sparse_kernel(std::sqrt(d2), ls, config.kernel.sigma_s);
      }
    }
  }
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n / 256, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
}

}  // namespace

std::vector<VoxelKey> step(SemanticMap& map, const TrainingFrame& frame, const StepOptions& options) {
  const auto& config = map.config();
  const auto& registry = map.registry();
  if (frame.time_index <= map.current_time()) {
    throw std::invalid_argument("frame time " + std::to_string(frame.time_index) +
                                " does not follow map time " + std::to_string(map.current_time()));
  }
  frame.validate(registry);

  const TrainingFrame prepared = prepare_frame(frame, config, registry, options);
  const VoxelBuckets buckets(prepared.points, config.resolution);
  const auto& active = buckets.keys();
  const int K = registry.num_classes();
  const auto stencil = spatial_stencil(config);

  std::vector<VoxelState> next(active.size());
  parallel_for(active.size(), options.threads, [&](std::size_t i) {
    const VoxelKey& key = active[i];
    const VoxelState* stored = map.find(key);
    VoxelState state = stored ? *stored : VoxelState::fresh(K, config.prior_alpha);

    if (options.prediction) {
      Eigen::VectorXd v = state.voxel_flow;
      for (int k = 0; k < K; ++k) {
        if (registry.is_dynamic(k) ? !options.bacc : !options.forc) v[k] = 0.0;
      }
      if ((v.array() >= config.flow_floor).any()) state = predict_with_flow(state, v, config.flow_floor);
    }
    accumulate_spatial(state.alpha, buckets, key, stencil, config);
    state.voxel_flow = aggregate_flow(buckets, key, state.voxel_flow, config, registry);
    state.last_time = frame.time_index;
    next[i] = std::move(state);
  });

  for (std::size_t i = 0; i < active.size(); ++i) map.insert(active[i], std::move(next[i]));
  map.set_current_time(frame.time_index);
  return active;
}

QueryResult query(const SemanticMap& map, const Vec3& position) {
  QueryResult r;
  const VoxelState* s = map.find(voxel_key_of(position, map.config().resolution));
  if (!s) {
    const int K = map.registry().num_classes();
    r.label = map.registry().free_class();
    r.theta = Eigen::VectorXd::Constant(K, 1.0 / K);
    return r;
  }
  auto est = map_label(*s);
  r.label = est.label;
  r.theta = std::move(est.theta);
  r.observed = true;
  return r;
}

}  // namespace dsm
