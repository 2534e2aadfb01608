#include "dsm/evaluation.hpp"

#include <stdexcept>
#include <unordered_map>

namespace dsm {

GroundTruthModel GroundTruthModel::point_set(TimeIndex t, std::vector<LabeledPoint> points) {
  GroundTruthModel g;
  g.mode = GroundTruthMode::point_set;
  g.time_index = t;
  g.points = std::move(points);
  return g;
}

GroundTruthModel GroundTruthModel::voxel_grid(TimeIndex t, double resolution, std::vector<LabeledVoxel> voxels) {
  if (!(resolution > 0)) throw std::invalid_argument("ground truth resolution must be positive");
  GroundTruthModel g;
  g.mode = GroundTruthMode::voxel_grid;
  g.time_index = t;
  g.resolution = resolution;
  g.voxels = std::move(voxels);
  return g;
}

Vec3 GroundTruthModel::position(std::size_t i) const {
  return mode == GroundTruthMode::point_set ? points[i].position : voxel_center(voxels[i].key, resolution);
}

ClassId GroundTruthModel::label(std::size_t i) const {
  return mode == GroundTruthMode::point_set ? points[i].label : voxels[i].label;
}

void GroundTruthModel::validate(const ClassRegistry& registry) const {
  if (mode == GroundTruthMode::voxel_grid && !(resolution > 0)) {
    throw std::invalid_argument("voxel-grid ground truth needs a positive resolution");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    if (!registry.is_valid(label(i))) {
      throw std::invalid_argument("ground truth element " + std::to_string(i) + " has label " +
                                  std::to_string(label(i)) + " outside the class registry");
    }
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes() != num_classes()) throw std::invalid_argument("confusion matrix size mismatch");
  counts_ += other.counts_;
  return *this;
}

EvalReport EvalReport::from(const ConfusionMatrix& confusion) {
  const auto& c = confusion.counts();
  const int K = confusion.num_classes();
  EvalReport r;
  r.classes.resize(static_cast<std::size_t>(K));
  r.evaluated = c.sum();
  double iou_sum = 0.0;
  int iou_count = 0;
  for (int k = 0; k < K; ++k) {
    auto& m = r.classes[static_cast<std::size_t>(k)];
    m.tp = c(k, k);
    m.fp = c.col(k).sum() - m.tp;
    m.fn = c.row(k).sum() - m.tp;
    auto ratio = [](std::int64_t num, std::int64_t den) -> std::optional<double> {
      if (den == 0) return std::nullopt;
      return static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn);
    m.iou = ratio(m.tp, m.tp + m.fp + m.fn);
    if (m.iou) {
      iou_sum += *m.iou;
      ++iou_count;
    }
  }
  if (iou_count > 0) r.miou = iou_sum / iou_count;
  return r;
}

std::set<VoxelKey> visible_set(const SemanticMap& map, const TrainingFrame& frame, const StepOptions& options) {
  const TrainingFrame prepared = prepare_frame(frame, map.config(), map.registry(), options);
  std::set<VoxelKey> out;
  for (const auto& key : active_keys(prepared, map.config().resolution)) {
    if (map.contains(key)) out.insert(key);
  }
  return out;
}

ClassId majority_label(const std::vector<std::int64_t>& votes, ClassId free_class) {
  ClassId best = -1;
  for (std::size_t k = 0; k < votes.size(); ++k) {
    const auto c = static_cast<ClassId>(k);
    if (c == free_class || votes[k] == 0) continue;
    if (best < 0 || votes[k] > votes[static_cast<std::size_t>(best)]) best = c;
  }
  return best >= 0 ? best : free_class;
}

ConfusionMatrix accuracy_confusion(const SemanticMap& map, const std::set<VoxelKey>& visible,
                                   const GroundTruthModel& gt) {
  if (gt.mode != GroundTruthMode::point_set) {
    throw std::invalid_argument("map accuracy needs point-set ground truth");
  }
  const auto& registry = map.registry();
  gt.validate(registry);
  const int K = registry.num_classes();
  const double res = map.config().resolution;

  std::unordered_map<VoxelKey, std::vector<std::int64_t>, VoxelKeyHash> votes;
  for (const auto& p : gt.points) {
    const VoxelKey key = voxel_key_of(p.position, res);
    if (!visible.count(key)) continue;
    auto& v = votes[key];
    if (v.empty()) v.assign(static_cast<std::size_t>(K), 0);
    ++v[static_cast<std::size_t>(p.label)];
  }

  ConfusionMatrix confusion(K);
  for (const auto& key : visible) {
    auto it = votes.find(key);
    if (it == votes.end()) continue;
    const VoxelState* state = map.find(key);
    if (!state) throw std::invalid_argument("visible voxel missing from the map");
    confusion.add(majority_label(it->second, registry.free_class()), map_label(*state).label);
  }
  return confusion;
}

EvalReport map_accuracy(const SemanticMap& map, const std::set<VoxelKey>& visible, const GroundTruthModel& gt) {
  return EvalReport::from(accuracy_confusion(map, visible, gt));
}

CompletenessConfusion completeness_confusion(const SemanticMap& map, const std::set<VoxelKey>& visible,
                                             const GroundTruthModel& gt, double margin) {
  if (!(margin > 0)) throw std::invalid_argument("completeness margin must be positive");
  const auto& registry = map.registry();
  gt.validate(registry);
  const int K = registry.num_classes();
  const double res = map.config().resolution;
  CompletenessConfusion out{ConfusionMatrix(K), ConfusionMatrix(K)};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Vec3 g = gt.position(i);
    const VoxelKey key = voxel_key_of(g, res);
    const VoxelState* state = map.find(key);
    // A grid point's nearest voxel center is the center of its own voxel.
    if (!state || (g - voxel_center(key, res)).norm() > margin) continue;
    const ClassId truth = gt.label(i);
    const bool in_view = visible.count(key) != 0;
    if (registry.is_dynamic(truth) && !in_view) continue;
    (in_view ? out.visible : out.occluded).add(truth, map_label(*state).label);
  }
  return out;
}

CompletenessReport map_completeness(const SemanticMap& map, const std::set<VoxelKey>& visible,
                                    const GroundTruthModel& gt, double margin) {
  auto c = completeness_confusion(map, visible, gt, margin);
  return {EvalReport::from(c.visible), EvalReport::from(c.occluded)};
}

ConfusionMatrix segmentation_confusion(const SemanticMap& map, const TrainingFrame& frame,
                                       const std::vector<ClassId>& gt_labels) {
  if (gt_labels.size() != frame.points.size()) {
    throw std::invalid_argument("segmentation ground truth has " + std::to_string(gt_labels.size()) +
                                " labels for " + std::to_string(frame.points.size()) + " points");
  }
  const auto& registry = map.registry();
  ConfusionMatrix confusion(registry.num_classes());
  for (std::size_t i = 0; i < gt_labels.size(); ++i) {
    if (!registry.is_valid(gt_labels[i])) throw std::invalid_argument("segmentation label outside the registry");
    const auto r = query(map, frame.points[i].position);
    if (!r.observed) continue;
    confusion.add(gt_labels[i], r.label);
  }
  return confusion;
}

EvalReport segmentation_eval(const SemanticMap& map, const TrainingFrame& frame,
                             const std::vector<ClassId>& gt_labels) {
  return EvalReport::from(segmentation_confusion(map, frame, gt_labels));
}

}  // namespace dsm
