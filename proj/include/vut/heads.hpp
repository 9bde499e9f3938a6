#pragma once

#include <vector>

#include "vut/model_config.hpp"
#include "vut/param_store.hpp"
#include "vut/view.hpp"

namespace vut {

struct GtObject {
  int type_id = 0;
  Box bbox;
};

// Detection targets for a screen: its leaf widgets in pre-order.
std::vector<GtObject> gt_objects(const Screen& screen);

// One prediction slot per query; class logits include the trailing PADDING
// ("no object") class. Boxes are sigmoid-bounded and canonicalized so
// top < bottom and left < right always hold.
struct DetectionOutput {
  Var type_logits;  // [N, K+1]
  Var boxes;        // [N, 4], [top,left,right,bottom]
};

DetectionOutput detect_head(GraphContext& ctx, const ModelConfig& cfg, const Var& h_v);

struct DetectedObject {
  int type_id = 0;
  Box bbox;
  double score = 0.0;
};

// Slots whose class argmax is PADDING are dropped; score is the best
// non-PADDING class probability.
std::vector<DetectedObject> decode_detections(const Tensor& type_logits, const Tensor& boxes);

struct MatchAssignment {
  std::vector<int> slot_of_gt;  // injective gt index -> query slot
  double total_cost = 0.0;
};

// Compound matching weights (class / L1 / GIoU) and the down-weight applied
// to the PADDING class in the classification loss.
inline constexpr double kMatchL1Weight = 5.0;
inline constexpr double kMatchGiouWeight = 2.0;
inline constexpr double kPaddingClassWeight = 0.1;

// Optimal assignment of ground-truth objects to query slots under
// -p(class) + 5*L1 + 2*(1-GIoU), computed on detached values.
MatchAssignment hungarian_match(const DetectionOutput& pred, const std::vector<GtObject>& gt);

// Class CE over all slots (unmatched slots trained toward PADDING with weight
// 0.1) plus box L1/GIoU terms on matched slots, normalized by the GT count.
Var detection_loss(const DetectionOutput& pred, const std::vector<GtObject>& gt,
                   const MatchAssignment& match);

// Rows of the text head: answer token i (1-based) is predicted from decoder
// state |Q|+i-1, so the slice starts at the question's final token.
Var text_step_logits(GraphContext& ctx, const Var& g, int question_len, int answer_len);

struct PointerResult {
  Var logits;           // [1, N]; padded slots offset by -1e9
  std::vector<double> probs;  // softmax over slots; padded exactly 0
  int best = -1;        // argmax over valid slots
};

// Scores every node slot by dot product against the projected decoder state
// at the question's final token.
PointerResult pointer_scores(GraphContext& ctx, const Var& g, int question_len, const Var& h_v,
                             const std::vector<bool>& valid);

void register_detection_head_params(ParamStore& params, const ModelConfig& cfg,
                                    const RngStream& init);
void register_text_head_params(ParamStore& params, const ModelConfig& cfg, const RngStream& init);
void register_pointer_head_params(ParamStore& params, const ModelConfig& cfg,
                                  const RngStream& init);

}  // namespace vut
