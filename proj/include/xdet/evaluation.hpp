#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdet/geometry.hpp"
#include "xdet/scenegen.hpp"

namespace xdet {

struct PredRecord {
  std::int64_t image_id = 0;
  int class_id = 0;
  BoundingBox box;
  real confidence = 0;
};

// JSON lines, one object per detection.
void write_predictions_jsonl(const std::string& path, const std::vector<PredRecord>& preds);
std::vector<PredRecord> read_predictions_jsonl(const std::string& path);

struct GtInstance {
  std::int64_t image_id = 0;
  int class_id = 0;
  BoundingBox box;
};

std::vector<GtInstance> ground_truth_from_index(const std::string& index_path);

// All-points AP: detections ranked by confidence (ties by image id then
// input order), greedy matching at the IoU threshold with each ground truth
// matchable once, area under the running-max precision envelope.
double average_precision(std::vector<PredRecord> class_dets,
                         const std::vector<GtInstance>& class_gts, real iou_threshold);

struct ClassAp {
  int class_id = 0;
  double ap = 0;
  int num_gt = 0;
  int num_det = 0;
};

struct EvalResult {
  std::vector<ClassAp> per_class;          // classes with at least one GT
  std::vector<int> undefined_classes;      // zero GT instances, excluded from mAP
  double map = 0;
};

EvalResult mean_average_precision(const std::vector<PredRecord>& preds,
                                  const std::vector<GtInstance>& gts, int num_classes,
                                  real iou_threshold = real(0.5));

void write_eval_csv(const std::string& path, const EvalResult& result);
std::string format_eval_table(const EvalResult& result);

}  // namespace xdet
