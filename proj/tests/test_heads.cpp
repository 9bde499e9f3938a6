#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vut/corpus.hpp"
#include "vut/errors.hpp"
#include "vut/heads.hpp"

#include "test_util.hpp"

using namespace vut;
using vut::test::fd_check_inputs;
using vut::test::fd_check_params;
using vut::test::hand_screen;
using vut::test::micro_model;

namespace {

Tensor rnd(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<double> vals(static_cast<size_t>(n));
  for (auto& v : vals) v = rng.uniform(lo, hi);
  return Tensor::from_values(std::move(shape), vals, DType::F64);
}

// Independent matching cost: own softmax, own box terms. Mirrors objects and
// weights, not code.
double ref_cost(const Tensor& logits, const Tensor& boxes, const GtObject& g, int64_t s) {
  int64_t k = logits.dim(1);
  double mx = logits.at(s, 0);
  for (int64_t c = 1; c < k; ++c) mx = std::max(mx, logits.at(s, c));
  double denom = 0.0;
  for (int64_t c = 0; c < k; ++c) denom += std::exp(logits.at(s, c) - mx);
  double p = std::exp(logits.at(s, g.type_id) - mx) / denom;

  double pt = boxes.at(s, 0), pl = boxes.at(s, 1), pr = boxes.at(s, 2), pb = boxes.at(s, 3);
  const Box& b = g.bbox;
  double l1 = std::abs(pt - b.top) + std::abs(pl - b.left) + std::abs(pr - b.right) +
              std::abs(pb - b.bottom);

  double ih = std::max(0.0, std::min(pb, b.bottom) - std::max(pt, b.top));
  double iw = std::max(0.0, std::min(pr, b.right) - std::max(pl, b.left));
  double inter = ih * iw;
  double uni = (pb - pt) * (pr - pl) + (b.bottom - b.top) * (b.right - b.left) - inter;
  double enc = (std::max(pb, b.bottom) - std::min(pt, b.top)) *
               (std::max(pr, b.right) - std::min(pl, b.left));
  double gi = inter / uni - (enc - uni) / enc;
  return -p + 5.0 * l1 + 2.0 * (1.0 - gi);
}

// Exhaustive minimum over every injective assignment of objects to slots.
double brute_force_cost(const Tensor& logits, const Tensor& boxes,
                        const std::vector<GtObject>& gt) {
  int64_t n_slots = boxes.dim(0);
  std::vector<int64_t> order(static_cast<size_t>(n_slots));
  std::iota(order.begin(), order.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (size_t i = 0; i < gt.size(); ++i) total += ref_cost(logits, boxes, gt[i], order[i]);
    best = std::min(best, total);
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

Box random_box(RngStream& rng) {
  double t = rng.uniform(0.05, 0.6), l = rng.uniform(0.05, 0.6);
  return {t, l, l + rng.uniform(0.1, 0.38), t + rng.uniform(0.1, 0.38)};
}

}  // namespace

TEST_CASE("ground-truth objects are the leaves in pre-order") {
  Screen s = hand_screen();
  auto gt = gt_objects(s);
  REQUIRE(gt.size() == 3);
  CHECK(gt[0].type_id == type_id_by_name("button"));
  CHECK(gt[0].bbox.top == 0.10);
  CHECK(gt[0].bbox.right == 0.45);
  CHECK(gt[1].type_id == type_id_by_name("label"));
  CHECK(gt[1].bbox.bottom == 0.50);
  CHECK(gt[2].type_id == type_id_by_name("image"));
  CHECK(gt[2].bbox.left == 0.20);
}

TEST_CASE("detection head emits canonical boxes") {
  ModelConfig cfg = micro_model(DType::F64);
  ParamStore params;
  register_detection_head_params(params, cfg, RngStream(11, "model/init"));
  GraphContext ctx(params, false, RngStream(0, "t"));

  RngStream rng(4, "data");
  for (int trial = 0; trial < 4; ++trial) {
    // large activations push the sigmoid to its rails; ordering must survive
    Tensor h = rnd({cfg.n_queries, cfg.d_model}, rng, -8.0, 8.0);
    DetectionOutput out = detect_head(ctx, cfg, Var::constant(h));
    REQUIRE(out.type_logits.shape() == Shape{cfg.n_queries, cfg.n_classes()});
    REQUIRE(out.boxes.shape() == Shape{cfg.n_queries, 4});
    for (int64_t q = 0; q < cfg.n_queries; ++q) {
      double t = out.boxes.value().at(q, 0), l = out.boxes.value().at(q, 1);
      double r = out.boxes.value().at(q, 2), b = out.boxes.value().at(q, 3);
      CHECK(t < b);
      CHECK(l < r);
      CHECK(t > 0.0);
      CHECK(b < 1.0);
      CHECK(l > 0.0);
      CHECK(r < 1.0);
    }
  }
}

TEST_CASE("padding slots are dropped when decoding") {
  int64_t k = 14;  // 13 types + PADDING
  Tensor logits = Tensor::zeros({3, k}, DType::F64);
  logits.set(0, 2, std::log(9.0));
  logits.set(1, k - 1, 5.0);  // argmax PADDING: dropped
  logits.set(2, 0, std::log(9.0));
  Tensor boxes = Tensor::from_values({3, 4},
                                     {0.1, 0.1, 0.4, 0.3,   //
                                      0.2, 0.2, 0.5, 0.6,   //
                                      0.5, 0.5, 0.9, 0.8},
                                     DType::F64);
  auto dets = decode_detections(logits, boxes);
  REQUIRE(dets.size() == 2);
  CHECK(dets[0].type_id == 2);
  CHECK(dets[1].type_id == 0);
  // softmax with one logit at ln 9 over 14 classes: p = 9/22
  CHECK(std::abs(dets[0].score - 0.4090909090909091) <= 1e-12);
  CHECK(std::abs(dets[1].score - 0.4090909090909091) <= 1e-12);
  CHECK(dets[0].bbox.left == 0.1);
  CHECK(dets[1].bbox.top == 0.5);
}

TEST_CASE("matcher equals the brute force optimum") {
  RngStream rng(21, "match");
  for (int trial = 0; trial < 60; ++trial) {
    int64_t n_slots = 2 + int64_t(rng.uniform(0.0, 5.999));
    size_t n_gt = 1 + size_t(rng.uniform(0.0, double(std::min<int64_t>(n_slots, 5)) - 0.001));
    Tensor logits = rnd({n_slots, 6}, rng, -2.0, 2.0);
    Tensor boxes = Tensor::zeros({n_slots, 4}, DType::F64);
    for (int64_t s = 0; s < n_slots; ++s) {
      Box b = random_box(rng);
      boxes.set(s, 0, b.top);
      boxes.set(s, 1, b.left);
      boxes.set(s, 2, b.right);
      boxes.set(s, 3, b.bottom);
    }
    std::vector<GtObject> gt;
    for (size_t i = 0; i < n_gt; ++i)
      gt.push_back({int(rng.uniform(0.0, 4.999)), random_box(rng)});

    DetectionOutput pred{Var::constant(logits), Var::constant(boxes)};
    MatchAssignment m = hungarian_match(pred, gt);
    REQUIRE(m.slot_of_gt.size() == n_gt);

    std::vector<bool> used(static_cast<size_t>(n_slots), false);
    double recomputed = 0.0;
    for (size_t i = 0; i < n_gt; ++i) {
      int s = m.slot_of_gt[i];
      REQUIRE(s >= 0);
      REQUIRE(s < n_slots);
      CHECK(!used[size_t(s)]);
      used[size_t(s)] = true;
      recomputed += ref_cost(logits, boxes, gt[i], s);
    }
    CHECK(std::abs(recomputed - m.total_cost) <= 1e-9);
    CHECK(std::abs(brute_force_cost(logits, boxes, gt) - m.total_cost) <= 1e-9);
  }
}

TEST_CASE("matcher rejects impossible instances") {
  Tensor logits = Tensor::zeros({1, 6}, DType::F64);
  Tensor boxes = Tensor::from_values({1, 4}, {0.1, 0.1, 0.5, 0.5}, DType::F64);
  DetectionOutput pred{Var::constant(logits), Var::constant(boxes)};

  std::vector<GtObject> two = {{0, {0.1, 0.1, 0.5, 0.5}}, {1, {0.2, 0.2, 0.6, 0.6}}};
  CHECK_THROWS_AS(hungarian_match(pred, two), DataError);
  std::vector<GtObject> stray = {{5, {0.1, 0.1, 0.5, 0.5}}};  // 5 == PADDING here
  CHECK_THROWS_AS(hungarian_match(pred, stray), DataError);

  MatchAssignment empty = hungarian_match(pred, {});
  CHECK(empty.slot_of_gt.empty());
  CHECK(empty.total_cost == 0.0);
}

TEST_CASE("matching cost and compound loss match the frozen oracle") {
  // 3 slots, 4 classes (PADDING = 3); expectations from an independent
  // NumPy evaluation (tests/oracles/heads_values.py)
  Tensor logits = Tensor::from_values({3, 4},
                                      {2.0, 0.5, -1.0, 0.0,  //
                                       0.0, 1.5, 0.3, 2.0,   //
                                       1.0, -0.5, 0.2, 0.1},
                                      DType::F64);
  Tensor boxes = Tensor::from_values({3, 4},
                                     {0.10, 0.10, 0.40, 0.30,  //
                                      0.50, 0.50, 0.90, 0.80,  //
                                      0.20, 0.60, 0.80, 0.70},
                                     DType::F64);
  DetectionOutput pred{Var::constant(logits), Var::constant(boxes)};
  std::vector<GtObject> gt = {{0, {0.12, 0.08, 0.42, 0.33}}, {1, {0.50, 0.50, 0.90, 0.80}}};

  MatchAssignment m = hungarian_match(pred, gt);
  REQUIRE(m.slot_of_gt == std::vector<int>{0, 1});
  CHECK(std::abs(m.total_cost - 0.04985697600270883) <= 1e-12);

  Var loss = detection_loss(pred, gt, m);
  CHECK(std::abs(loss.scalar() - 1.3281422199527386) <= 1e-12);

  MatchAssignment none;
  CHECK(std::abs(detection_loss(pred, {}, none).scalar() - 1.5429807778407452) <= 1e-12);
}

TEST_CASE("near-perfect predictions cost almost nothing") {
  std::vector<GtObject> gt = {{1, {0.2, 0.2, 0.6, 0.7}}, {3, {0.1, 0.5, 0.9, 0.4}}};
  Tensor logits = Tensor::zeros({2, 6}, DType::F64);
  logits.set(0, 1, 20.0);
  logits.set(1, 3, 20.0);
  Tensor boxes = Tensor::from_values(
      {2, 4}, {0.2, 0.2, 0.6, 0.7, 0.1, 0.5, 0.9, 0.4}, DType::F64);
  DetectionOutput pred{Var::constant(logits), Var::constant(boxes)};
  MatchAssignment m = hungarian_match(pred, gt);
  CHECK(detection_loss(pred, gt, m).scalar() < 1e-3);
}

TEST_CASE("detection loss differentiates") {
  RngStream rng(7, "data");
  Tensor logits = rnd({4, 5}, rng, -1.5, 1.5);
  Tensor boxes = Tensor::zeros({4, 4}, DType::F64);
  for (int64_t s = 0; s < 4; ++s) {
    Box b = random_box(rng);
    boxes.set(s, 0, b.top);
    boxes.set(s, 1, b.left);
    boxes.set(s, 2, b.right);
    boxes.set(s, 3, b.bottom);
  }
  std::vector<GtObject> gt = {{0, random_box(rng)}, {2, random_box(rng)}};
  MatchAssignment m =
      hungarian_match({Var::constant(logits), Var::constant(boxes)}, gt);

  auto res = fd_check_inputs({logits, boxes}, [&](const std::vector<Var>& in) {
    return detection_loss({in[0], in[1]}, gt, m);
  });
  CHECK(res.checked > 0);
  CHECK(res.max_rel <= 1e-4);
}

TEST_CASE("text head reads the answer rows") {
  ModelConfig cfg = micro_model(DType::F64);
  Vocabulary vocab = build_vocabulary();
  cfg.vocab_size = vocab.size();
  ParamStore params;
  register_text_head_params(params, cfg, RngStream(13, "model/init"));
  GraphContext ctx(params, false, RngStream(0, "t"));

  RngStream rng(5, "data");
  Tensor g = rnd({6, cfg.d_model}, rng);
  int q_len = 3, a_len = 2;
  Var logits = text_step_logits(ctx, Var::constant(g), q_len, a_len);
  REQUIRE(logits.shape() == Shape{a_len, cfg.vocab_size});

  const Tensor& w = params.tensor("head.txt.W_txt");
  for (int64_t i = 0; i < a_len; ++i)
    for (int64_t v = 0; v < cfg.vocab_size; v += 37) {
      double want = 0.0;
      for (int64_t d = 0; d < cfg.d_model; ++d) want += g.at(q_len - 1 + i, d) * w.at(d, v);
      CHECK(std::abs(logits.value().at(i, v) - want) <= 1e-12);
    }

  CHECK_THROWS_AS(text_step_logits(ctx, Var::constant(g), 0, 1), DataError);
  CHECK_THROWS_AS(text_step_logits(ctx, Var::constant(g), 3, 0), DataError);
  CHECK_THROWS_AS(text_step_logits(ctx, Var::constant(g), 7, 1), DataError);
  CHECK_THROWS_AS(text_step_logits(ctx, Var::constant(g), 3, 5), DataError);

  auto res = fd_check_params(params, [&](GraphContext& c) {
    Var lg = text_step_logits(c, Var::constant(g), q_len, a_len);
    return cross_entropy_rows(lg, {int(vocab.id("button")), Vocabulary::kEos});
  });
  CHECK(res.checked > 0);
  CHECK(res.max_rel <= 1e-4);
}

TEST_CASE("pointer head masks padded slots") {
  ModelConfig cfg = micro_model(DType::F64);
  ParamStore params;
  register_pointer_head_params(params, cfg, RngStream(17, "model/init"));
  GraphContext ctx(params, false, RngStream(0, "t"));

  RngStream rng(6, "data");
  Tensor g = rnd({4, cfg.d_model}, rng);
  Tensor h_v = rnd({5, cfg.d_model}, rng);
  std::vector<bool> valid = {true, true, true, false, false};
  int q_len = 4;

  PointerResult res = pointer_scores(ctx, Var::constant(g), q_len, Var::constant(h_v), valid);
  REQUIRE(res.logits.shape() == Shape{1, 5});
  // additive mask: the raw dot product rides on top of the -1e9 offset
  CHECK(res.logits.value().at(0, 3) <= -1e9 + 1e3);
  CHECK(res.logits.value().at(0, 4) <= -1e9 + 1e3);
  REQUIRE(res.probs.size() == 5);
  CHECK(res.probs[3] == 0.0);
  CHECK(res.probs[4] == 0.0);
  double sum = 0.0;
  for (double p : res.probs) sum += p;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
  CHECK(res.best >= 0);
  CHECK(res.best < 3);
  CHECK(res.probs[size_t(res.best)] ==
        *std::max_element(res.probs.begin(), res.probs.end()));

  // logit_j = (g_last_question_row . W_ptr) . h_j, recomputed by hand
  const Tensor& w = params.tensor("head.ptr.W_ptr");
  std::vector<double> query(size_t(cfg.d_model), 0.0);
  for (int64_t o = 0; o < cfg.d_model; ++o)
    for (int64_t d = 0; d < cfg.d_model; ++d) query[size_t(o)] += g.at(q_len - 1, d) * w.at(d, o);
  for (int64_t j = 0; j < 3; ++j) {
    double want = 0.0;
    for (int64_t d = 0; d < cfg.d_model; ++d) want += query[size_t(d)] * h_v.at(j, d);
    CHECK(std::abs(res.logits.value().at(0, j) - want) <= 1e-10);
  }

  auto fd = fd_check_params(params, [&](GraphContext& c) {
    PointerResult r = pointer_scores(c, Var::constant(g), q_len, Var::constant(h_v), valid);
    return cross_entropy_rows(r.logits, {1});
  });
  CHECK(fd.checked > 0);
  CHECK(fd.max_rel <= 1e-4);
}
