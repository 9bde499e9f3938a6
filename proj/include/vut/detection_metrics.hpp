#pragma once

#include <vector>

#include "vut/view.hpp"

namespace vut {

struct ScoredBox {
  int class_id = 0;
  Box box;
  double score = 0.0;
};

struct LabeledBox {
  int class_id = 0;
  Box box;
};

// All values are percentages in [0, 100]; a statistic with no ground truth
// anywhere evaluates to 0.
struct DetectionSummary {
  double ap = 0.0;        // mean over classes and IoU 0.50:0.05:0.95
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ap_small = 0.0;  // boxes under 0.1% of image area
  double ap_medium = 0.0; // under 1%
  double ap_large = 0.0;
};

// COCO-protocol evaluation: per-class score-ranked greedy IoU matching,
// 101-point interpolated PR curves, classes without ground truth excluded
// from every mean. `preds` and `gts` are parallel per-image lists.
DetectionSummary ap_metrics(const std::vector<std::vector<ScoredBox>>& preds,
                            const std::vector<std::vector<LabeledBox>>& gts);

}  // namespace vut
