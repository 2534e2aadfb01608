#pragma once

#include <Eigen/Core>

#include "dsm/model.hpp"

namespace dsm {

// Subtracts the mean flow of static-labeled points (not dynamic, not free)
// from every point. Throws std::invalid_argument when there is no static point.
TrainingFrame ego_compensate(const TrainingFrame& frame, const ClassRegistry& registry);

// Moving-average filter f(new, prev) = lambda * new + (1 - lambda) * prev.
double temporal_filter(double new_v, double prev_v, double lambda);

// Per-class voxel flow for `key` from the frame points inside the voxel and
// its six face neighbors. Dynamic classes pool matching-label flow norms
// under the BACC kernel; the free class pools every dynamic point under the
// FORC kernel and is copied to all static classes. Both are normalized by
// the support size and blended with the previous flow.
Eigen::VectorXd aggregate_flow(const TrainingFrame& frame, const VoxelKey& key, const VoxelState& prev,
                               const MapConfig& config, const ClassRegistry& registry);

// Same computation over a pre-bucketed frame.
Eigen::VectorXd aggregate_flow(const VoxelBuckets& buckets, const VoxelKey& key, const Eigen::VectorXd& prev_flow,
                               const MapConfig& config, const ClassRegistry& registry);

}  // namespace dsm
