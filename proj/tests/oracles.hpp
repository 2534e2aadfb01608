#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "dsm/evaluation.hpp"
#include "dsm/mapper.hpp"
#include "dsm/model.hpp"

// Slow, independent reference computations for the test suites.
namespace oracle {

using Key = std::array<std::int64_t, 3>;
using Counts = std::vector<std::vector<std::int64_t>>;

// Kernel evaluated in 50-digit arithmetic, rounded to double at the end.
double kernel(double d, double l, double sigma);

Key key_of(const dsm::Vec3& p, double resolution);
dsm::VoxelKey to_voxel_key(const Key& k);

// Argmax of alpha, lowest id on ties.
int label_of(const Eigen::VectorXd& alpha);

// Frame returns plus free samples every `interval` along each ray.
std::vector<dsm::PointSample> augment(const dsm::TrainingFrame& frame, double interval, dsm::ClassId free_class);

// With all flows zero: alpha of every voxel after ingesting `frames` in
// order, summing every point of each frame into every voxel the frame touches.
std::map<Key, std::vector<double>> static_batch(const std::vector<dsm::TrainingFrame>& frames,
                                                const dsm::MapConfig& config, const dsm::ClassRegistry& registry,
                                                bool free_sampling);

// Per-class voxel flow by a scan over every point of the frame.
std::vector<double> voxel_flow(const std::vector<dsm::PointSample>& points, const Key& key,
                               const std::vector<double>& prev, const dsm::MapConfig& config,
                               const dsm::ClassRegistry& registry);

Counts zeros(int k);

// Visible voxel x every GT point.
Counts accuracy(const dsm::SemanticMap& map, const std::set<dsm::VoxelKey>& visible, const dsm::GroundTruthModel& gt);

// Every GT element x every map voxel, nearest center by exhaustive search.
std::pair<Counts, Counts> completeness(const dsm::SemanticMap& map, const std::set<dsm::VoxelKey>& visible,
                                       const dsm::GroundTruthModel& gt, double margin);

Counts segmentation(const dsm::SemanticMap& map, const dsm::TrainingFrame& frame,
                    const std::vector<dsm::ClassId>& gt_labels);

struct Metrics {
  std::vector<double> precision, recall, iou;  // NaN when undefined
  std::vector<std::int64_t> tp, fp, fn;
  double miou = 0.0;  // NaN when no class has support
};

Metrics metrics(const Counts& c);

}  // namespace oracle
