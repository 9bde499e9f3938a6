#include "vut/heads.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vut/encoder.hpp"
#include "vut/errors.hpp"

namespace vut {

std::vector<GtObject> gt_objects(const Screen& screen) {
  std::vector<GtObject> out;
  for (const ViewNode* node : screen.flattened)
    if (node->is_leaf()) out.push_back({node->type_id, node->bbox});
  return out;
}

DetectionOutput detect_head(GraphContext& ctx, const ModelConfig& cfg, const Var& h_v) {
  (void)cfg;
  DetectionOutput out;
  out.type_logits = matmul(h_v, ctx.param("head.det.type.w"));
  Var f = relu(add(matmul(h_v, ctx.param("head.det.mlp.w1")), ctx.param("head.det.mlp.b1")));
  f = relu(add(matmul(f, ctx.param("head.det.mlp.w2")), ctx.param("head.det.mlp.b2")));
  Var raw = sigmoid(matmul(f, ctx.param("head.det.box.w")));
  // Raw order [top,left,bottom,right]; sort each axis pair so the box is
  // always well-formed.
  Var t = slice_cols(raw, 0, 1), l = slice_cols(raw, 1, 1);
  Var b = slice_cols(raw, 2, 1), r = slice_cols(raw, 3, 1);
  out.boxes = concat_cols({minimum(t, b), minimum(l, r), maximum(l, r), maximum(t, b)});
  return out;
}

std::vector<DetectedObject> decode_detections(const Tensor& logits, const Tensor& boxes) {
  int64_t n_slots = logits.dim(0), n_classes = logits.dim(1);
  std::vector<DetectedObject> out;
  for (int64_t s = 0; s < n_slots; ++s) {
    double mx = -std::numeric_limits<double>::infinity();
    int best = 0;
    for (int64_t c = 0; c < n_classes; ++c)
      if (logits.at(s, c) > mx) {
        mx = logits.at(s, c);
        best = int(c);
      }
    if (best == int(n_classes) - 1) continue;  // PADDING slot
    double denom = 0.0, best_prob = 0.0;
    for (int64_t c = 0; c < n_classes; ++c) {
      double e = std::exp(logits.at(s, c) - mx);
      denom += e;
      if (c + 1 < n_classes && e > best_prob) best_prob = e;
    }
    out.push_back({best, Box{boxes.at(s, 0), boxes.at(s, 1), boxes.at(s, 2), boxes.at(s, 3)},
                   best_prob / denom});
  }
  return out;
}

namespace {

// Assignment of n rows to m >= n columns minimizing total cost, via the
// standard shortest-augmenting-path algorithm with potentials. Exact.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  int n = int(cost.size());
  int m = int(cost[0].size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(size_t(n) + 1, 0.0), v(size_t(m) + 1, 0.0);
  std::vector<int> p(size_t(m) + 1, 0), way(size_t(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(size_t(m) + 1, inf);
    std::vector<char> used(size_t(m) + 1, 0);
    do {
      used[size_t(j0)] = 1;
      int i0 = p[size_t(j0)], j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[size_t(j)]) continue;
        double cur = cost[size_t(i0 - 1)][size_t(j - 1)] - u[size_t(i0)] - v[size_t(j)];
        if (cur < minv[size_t(j)]) {
          minv[size_t(j)] = cur;
          way[size_t(j)] = j0;
        }
        if (minv[size_t(j)] < delta) {
          delta = minv[size_t(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[size_t(j)]) {
          u[size_t(p[size_t(j)])] += delta;
          v[size_t(j)] -= delta;
        } else {
          minv[size_t(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[size_t(j0)] != 0);
    do {
      int j1 = way[size_t(j0)];
      p[size_t(j0)] = p[size_t(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> result(size_t(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[size_t(j)] > 0) result[size_t(p[size_t(j)] - 1)] = j - 1;
  return result;
}

Box slot_box(const Tensor& boxes, int64_t slot) {
  return Box{boxes.at(slot, 0), boxes.at(slot, 1), boxes.at(slot, 2), boxes.at(slot, 3)};
}

}  // namespace

MatchAssignment hungarian_match(const DetectionOutput& pred, const std::vector<GtObject>& gt) {
  int64_t n_slots = pred.type_logits.dim(0);
  int64_t n_classes = pred.type_logits.dim(1);
  int n_gt = int(gt.size());
  if (n_gt > n_slots) throw DataError("matcher: more ground-truth objects than query slots");
  MatchAssignment out;
  if (n_gt == 0) return out;

  // Class probabilities on detached values.
  const Tensor& logits = pred.type_logits.value();
  std::vector<std::vector<double>> prob(static_cast<size_t>(n_slots),
                                        std::vector<double>(static_cast<size_t>(n_classes)));
  for (int64_t s = 0; s < n_slots; ++s) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t c = 0; c < n_classes; ++c) mx = std::max(mx, logits.at(s, c));
    double denom = 0.0;
    for (int64_t c = 0; c < n_classes; ++c) {
      prob[size_t(s)][size_t(c)] = std::exp(logits.at(s, c) - mx);
      denom += prob[size_t(s)][size_t(c)];
    }
    for (int64_t c = 0; c < n_classes; ++c) prob[size_t(s)][size_t(c)] /= denom;
  }

  const Tensor& boxes = pred.boxes.value();
  std::vector<std::vector<double>> cost(static_cast<size_t>(n_gt),
                                        std::vector<double>(static_cast<size_t>(n_slots)));
  for (int i = 0; i < n_gt; ++i) {
    if (gt[size_t(i)].type_id < 0 || gt[size_t(i)].type_id >= n_classes - 1)
      throw DataError("matcher: ground-truth class outside the detector inventory");
    for (int64_t s = 0; s < n_slots; ++s) {
      Box pb = slot_box(boxes, s);
      const Box& gb = gt[size_t(i)].bbox;
      double l1 = std::abs(pb.top - gb.top) + std::abs(pb.left - gb.left) +
                  std::abs(pb.right - gb.right) + std::abs(pb.bottom - gb.bottom);
      cost[size_t(i)][size_t(s)] = -prob[size_t(s)][size_t(gt[size_t(i)].type_id)] +
                                   kMatchL1Weight * l1 +
                                   kMatchGiouWeight * (1.0 - giou(pb, gb));
    }
  }

  out.slot_of_gt = solve_assignment(cost);
  for (int i = 0; i < n_gt; ++i) out.total_cost += cost[size_t(i)][size_t(out.slot_of_gt[size_t(i)])];
  return out;
}

Var detection_loss(const DetectionOutput& pred, const std::vector<GtObject>& gt,
                   const MatchAssignment& match) {
  int64_t n_slots = pred.type_logits.dim(0);
  int64_t n_classes = pred.type_logits.dim(1);
  if (match.slot_of_gt.size() != gt.size())
    throw DataError("detection loss: assignment does not cover the ground truth");
  int padding_class = int(n_classes - 1);

  std::vector<int> targets(size_t(n_slots), padding_class);
  for (size_t i = 0; i < gt.size(); ++i) targets[size_t(match.slot_of_gt[i])] = gt[i].type_id;
  std::vector<double> class_weights(size_t(n_classes), 1.0);
  class_weights[size_t(padding_class)] = kPaddingClassWeight;
  Var loss = cross_entropy_rows(pred.type_logits, targets, class_weights);
  if (gt.empty()) return loss;

  std::vector<int64_t> slots(gt.size());
  std::vector<double> gt_vals;
  gt_vals.reserve(gt.size() * 4);
  for (size_t i = 0; i < gt.size(); ++i) {
    slots[i] = match.slot_of_gt[i];
    for (double c : gt[i].bbox.coords()) gt_vals.push_back(c);
  }
  Var pb = gather_rows(pred.boxes, slots);
  Var gb = Var::constant(
      Tensor::from_values({int64_t(gt.size()), 4}, gt_vals, pred.boxes.dtype()));

  Var l1 = reduce_sum(abs_val(sub(pb, gb)));

  auto col = [](const Var& v, int64_t c) { return slice_cols(v, c, 1); };
  Var pt = col(pb, 0), pl = col(pb, 1), pr = col(pb, 2), pbm = col(pb, 3);
  Var gt_t = col(gb, 0), gl = col(gb, 1), gr = col(gb, 2), gbm = col(gb, 3);
  Var ih = relu(sub(minimum(pbm, gbm), maximum(pt, gt_t)));
  Var iw = relu(sub(minimum(pr, gr), maximum(pl, gl)));
  Var inter = mul(ih, iw);
  Var area_p = mul(sub(pbm, pt), sub(pr, pl));
  Var area_g = mul(sub(gbm, gt_t), sub(gr, gl));
  Var uni = sub(add(area_p, area_g), inter);
  Var enc = mul(sub(maximum(pbm, gbm), minimum(pt, gt_t)),
                sub(maximum(pr, gr), minimum(pl, gl)));
  Var giou_v = sub(div(inter, uni), div(sub(enc, uni), enc));
  Var giou_loss = reduce_sum(add_scalar(neg(giou_v), 1.0));

  Var box_terms = add(mul_scalar(l1, kMatchL1Weight), mul_scalar(giou_loss, kMatchGiouWeight));
  return add(loss, mul_scalar(box_terms, 1.0 / double(gt.size())));
}

Var text_step_logits(GraphContext& ctx, const Var& g, int question_len, int answer_len) {
  if (question_len < 1) throw DataError("text head: empty question");
  if (answer_len < 1) throw DataError("text head: empty answer");
  if (int64_t(question_len) > g.dim(0))
    throw DataError("text head: decoder output shorter than the question");
  if (int64_t(question_len - 1 + answer_len) > g.dim(0))
    throw DataError("text head: answer extends past the decoded sequence");
  return matmul(slice_rows(g, question_len - 1, answer_len), ctx.param("head.txt.W_txt"));
}

PointerResult pointer_scores(GraphContext& ctx, const Var& g, int question_len, const Var& h_v,
                             const std::vector<bool>& valid) {
  if (question_len < 1 || int64_t(question_len) > g.dim(0))
    throw DataError("pointer head: question boundary outside the decoded sequence");
  if (size_t(h_v.dim(0)) != valid.size())
    throw DataError("pointer head: validity mask does not match slot count");
  bool any = false;
  for (bool v : valid) any |= v;
  if (!any) throw DataError("pointer head: every slot is masked out");

  PointerResult out;
  Var q = matmul(slice_rows(g, question_len - 1, 1), ctx.param("head.ptr.W_ptr"));
  Var logits = matmul(q, h_v, false, true);
  Tensor bias = attention_bias(valid, logits.dtype());
  if (bias.defined()) logits = add(logits, Var::constant(bias));
  out.logits = logits;

  int64_t n = logits.dim(1);
  const Tensor& lv = logits.value();
  double mx = -std::numeric_limits<double>::infinity();
  for (int64_t j = 0; j < n; ++j)
    if (valid[size_t(j)] && lv.at(0, j) > mx) {
      mx = lv.at(0, j);
      out.best = int(j);
    }
  out.probs.assign(size_t(n), 0.0);
  double denom = 0.0;
  for (int64_t j = 0; j < n; ++j) {
    if (!valid[size_t(j)]) continue;
    out.probs[size_t(j)] = std::exp(lv.at(0, j) - mx);
    denom += out.probs[size_t(j)];
  }
  for (double& p : out.probs) p /= denom;
  return out;
}

void register_detection_head_params(ParamStore& params, const ModelConfig& cfg,
                                    const RngStream& init) {
  DType dt = cfg.dtype;
  int64_t d = cfg.d_model;
  RngStream s = init.child("init/head.det");
  params.add("head.det.type.w", init_linear(d, cfg.n_classes(), s, dt));
  params.add("head.det.mlp.w1", init_linear(d, d, s, dt));
  params.add("head.det.mlp.b1", Tensor::zeros({1, d}, dt));
  params.add("head.det.mlp.w2", init_linear(d, d, s, dt));
  params.add("head.det.mlp.b2", Tensor::zeros({1, d}, dt));
  params.add("head.det.box.w", init_linear(d, 4, s, dt));
}

void register_text_head_params(ParamStore& params, const ModelConfig& cfg,
                               const RngStream& init) {
  RngStream s = init.child("init/head.txt");
  params.add("head.txt.W_txt", init_linear(cfg.d_model, cfg.vocab_size, s, cfg.dtype));
}

void register_pointer_head_params(ParamStore& params, const ModelConfig& cfg,
                                  const RngStream& init) {
  RngStream s = init.child("init/head.ptr");
  params.add("head.ptr.W_ptr", init_linear(cfg.d_model, cfg.d_model, s, cfg.dtype));
}

}  // namespace vut
