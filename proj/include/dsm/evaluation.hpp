#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dsm/mapper.hpp"
#include "dsm/model.hpp"

namespace dsm {

enum class GroundTruthMode { point_set, voxel_grid };

struct LabeledPoint {
  Vec3 position = Vec3::Zero();
  ClassId label = 0;
};

struct LabeledVoxel {
  VoxelKey key;
  ClassId label = 0;
};

// Reference world model: a labeled point set (single view) or a labeled
// voxel grid at one resolution (multi view).
struct GroundTruthModel {
  GroundTruthMode mode = GroundTruthMode::point_set;
  TimeIndex time_index = 0;
  std::vector<LabeledPoint> points;
  double resolution = 0.0;
  std::vector<LabeledVoxel> voxels;

  static GroundTruthModel point_set(TimeIndex t, std::vector<LabeledPoint> points);
  static GroundTruthModel voxel_grid(TimeIndex t, double resolution, std::vector<LabeledVoxel> voxels);

  std::size_t size() const { return mode == GroundTruthMode::point_set ? points.size() : voxels.size(); }
  // Point position, or voxel center in voxel-grid mode.
  Vec3 position(std::size_t i) const;
  ClassId label(std::size_t i) const;
  void validate(const ClassRegistry& registry) const;
};

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes) : counts_(CountMatrix::Zero(num_classes, num_classes)) {}

  void add(ClassId truth, ClassId prediction) { ++counts_(truth, prediction); }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  const CountMatrix& counts() const { return counts_; }
  int num_classes() const { return static_cast<int>(counts_.rows()); }
  std::int64_t total() const { return counts_.sum(); }

 private:
  CountMatrix counts_;
};

struct ClassMetrics {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> iou;
};

struct EvalReport {
  std::vector<ClassMetrics> classes;
  // Mean IoU over classes with TP + FP + FN > 0.
  std::optional<double> miou;
  std::int64_t evaluated = 0;

  static EvalReport from(const ConfusionMatrix& confusion);
};

// The step's active set, restricted to voxels present in the map.
std::set<VoxelKey> visible_set(const SemanticMap& map, const TrainingFrame& frame, const StepOptions& options);

// Majority label of ground truth samples inside a voxel; occupied labels win
// over free, ties go to the lowest id.
ClassId majority_label(const std::vector<std::int64_t>& votes, ClassId free_class);

ConfusionMatrix accuracy_confusion(const SemanticMap& map, const std::set<VoxelKey>& visible,
                                   const GroundTruthModel& gt);
EvalReport map_accuracy(const SemanticMap& map, const std::set<VoxelKey>& visible, const GroundTruthModel& gt);

struct CompletenessConfusion {
  ConfusionMatrix visible;
  ConfusionMatrix occluded;
};

CompletenessConfusion completeness_confusion(const SemanticMap& map, const std::set<VoxelKey>& visible,
                                             const GroundTruthModel& gt, double margin);

struct CompletenessReport {
  EvalReport visible;
  EvalReport occluded;
};

CompletenessReport map_completeness(const SemanticMap& map, const std::set<VoxelKey>& visible,
                                    const GroundTruthModel& gt, double margin);

ConfusionMatrix segmentation_confusion(const SemanticMap& map, const TrainingFrame& frame,
                                       const std::vector<ClassId>& gt_labels);
EvalReport segmentation_eval(const SemanticMap& map, const TrainingFrame& frame, const std::vector<ClassId>& gt_labels);

}  // namespace dsm
