#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "dsm/model.hpp"

namespace dsm {

// Sparse voxel map of Dirichlet concentrations and voxel flows.
class SemanticMap {
 public:
  using Table = std::unordered_map<VoxelKey, VoxelState, VoxelKeyHash>;

  SemanticMap(MapConfig config, ClassRegistry registry);

  const MapConfig& config() const { return config_; }
  const ClassRegistry& registry() const { return registry_; }
  // -1 until the first frame has been ingested.
  TimeIndex current_time() const { return current_time_; }
  void set_current_time(TimeIndex t) { current_time_ = t; }

  std::size_t size() const { return voxels_.size(); }
  bool empty() const { return voxels_.empty(); }
  const VoxelState* find(const VoxelKey& key) const;
  bool contains(const VoxelKey& key) const { return voxels_.count(key) != 0; }
  const Table& voxels() const { return voxels_; }
  std::vector<VoxelKey> sorted_keys() const;

  // Inserts or replaces; the state must match the registry dimension and be valid.
  void insert(const VoxelKey& key, VoxelState state);

 private:
  MapConfig config_;
  ClassRegistry registry_;
  Table voxels_;
  TimeIndex current_time_ = -1;
};

// Multiplicative transition weights exp(-v^2); flows under `flow_floor` count as zero.
template <typename Derived>
Eigen::VectorXd transition_weights(const Eigen::MatrixBase<Derived>& flow, double flow_floor) {
  return flow.unaryExpr([flow_floor](double v) { return v < flow_floor ? 1.0 : std::exp(-v * v); }).eval();
}

// Auto-regressive prediction: alpha^k <- exp(-(v^k)^2) alpha^k. Results that
// would underflow are held at the smallest normal double so alpha stays positive.
VoxelState predict(const VoxelState& state, const MapConfig& config);
VoxelState predict_with_flow(const VoxelState& state, const Eigen::VectorXd& flow, double flow_floor);

// Adds K_s(x_i, x_j) to alpha^{y_i} for every frame point.
VoxelState update(const VoxelState& state, const VoxelKey& key, const TrainingFrame& frame, const MapConfig& config,
                  const ClassRegistry& registry);

struct MapEstimate {
  ClassId label = 0;
  Eigen::VectorXd theta;
};

// Dirichlet mode (alpha^k - 1) / (sum alpha - K) when every alpha^k > 1, the
// normalized mean otherwise. Label is the argmax, lowest id on ties.
MapEstimate map_label(const VoxelState& state);

// Points every `interval` meters from origin toward endpoint, strictly
// before the endpoint, labeled free with zero flow.
std::vector<PointSample> free_space_samples(const Vec3& origin, const Vec3& endpoint, double interval,
                                            const ClassRegistry& registry);

struct StepOptions {
  bool free_sampling = true;
  bool ego_compensation = true;
  bool bacc = true;
  bool forc = true;
  // false gives the static-world baseline (no prediction at all).
  bool prediction = true;
  // 0 picks the hardware concurrency.
  unsigned threads = 1;
};

// Applies the optional ego compensation and free-space augmentation. Points
// that coincide with the sensor origin get no free samples.
TrainingFrame prepare_frame(const TrainingFrame& frame, const MapConfig& config, const ClassRegistry& registry,
                            const StepOptions& options);

// Voxels that contain at least one point of an already prepared frame.
std::vector<VoxelKey> active_keys(const TrainingFrame& prepared, double resolution);

// One predict/update/aggregate cycle. Returns the sorted active set.
std::vector<VoxelKey> step(SemanticMap& map, const TrainingFrame& frame, const StepOptions& options = {});

struct QueryResult {
  ClassId label = 0;
  Eigen::VectorXd theta;
  bool observed = false;
};

QueryResult query(const SemanticMap& map, const Vec3& position);

}  // namespace dsm
