#include <doctest.h>

#include <cmath>
#include <optional>
#include <vector>

#include "vut/corpus.hpp"
#include "vut/embedders.hpp"
#include "vut/errors.hpp"
#include "vut/render.hpp"

#include "test_util.hpp"

using namespace vut;
using vut::test::fd_check_params;
using vut::test::hand_screen;
using vut::test::micro_model;

namespace {

ParamStore embedder_params(const ModelConfig& cfg) {
  ParamStore params;
  RngStream init(13, "model/init");
  register_image_embedder_params(params, cfg, init);
  register_query_slot_params(params, cfg, init);
  register_hierarchy_embedder_params(params, cfg, init);
  return params;
}

}  // namespace

TEST_CASE("focus maps match the softmax oracle and identities") {
  ModelConfig cfg = micro_model();
  cfg.raster_h = cfg.raster_w = 8;  // stride 4 -> 2x2 grid, M = 4
  cfg.n_queries = 3;
  REQUIRE(cfg.m_tokens() == 4);

  // beta=2, tau=-1 on a single-cell region: top-left cell center (0.25,0.25)
  Box top_left{0.0, 0.0, 0.45, 0.45};
  FocusMaps maps = focus_maps(cfg, top_left, 1, 3);
  const double kAlphaS[] = {3.4801940262456323, 0.173268657918123, 0.173268657918123,
                            0.173268657918123};
  const double kAlphaV[] = {0.13583550223088722, 2.728328995538226, 0.13583550223088722};
  double sum_s = 0, sum_v = 0;
  for (int i = 0; i < 4; ++i) {
    CHECK(maps.alpha_s.at(i) == doctest::Approx(kAlphaS[i]).epsilon(1e-12));
    CHECK(maps.alpha_s.at(i) >= 0.0);
    sum_s += maps.alpha_s.at(i);
  }
  for (int i = 0; i < 3; ++i) {
    CHECK(maps.alpha_v.at(i) == doctest::Approx(kAlphaV[i]).epsilon(1e-12));
    sum_v += maps.alpha_v.at(i);
  }
  CHECK(sum_s == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(sum_v == doctest::Approx(3.0).epsilon(1e-10));

  // no target at all: exact ones (identity modulation)
  FocusMaps none = focus_maps(cfg, std::nullopt, std::nullopt, 3);
  CHECK(none.alpha_s.bit_equal(Tensor::ones({4}, DType::F64)));
  CHECK(none.alpha_v.bit_equal(Tensor::ones({3}, DType::F64)));

  // beta == tau: uniform logits, exact ones
  ModelConfig flat = cfg;
  flat.focus_beta = flat.focus_tau = 0.7;
  FocusMaps uni = focus_maps(flat, top_left, 1, 3);
  CHECK(uni.alpha_s.bit_equal(Tensor::ones({4}, DType::F64)));

  // padded node slots carry exactly zero
  FocusMaps padded = focus_maps(cfg, std::nullopt, 0, 2);
  CHECK(padded.alpha_v.at(2) == 0.0);
  CHECK(padded.alpha_v.at(0) + padded.alpha_v.at(1) == doctest::Approx(2.0).epsilon(1e-10));

  // shifting both logit levels by a constant cannot change the softmax
  ModelConfig shifted = cfg;
  shifted.focus_beta += 17.25;
  shifted.focus_tau += 17.25;
  FocusMaps m2 = focus_maps(shifted, top_left, 1, 3);
  CHECK(maps.alpha_s.max_abs_diff(m2.alpha_s) <= 1e-6);
  CHECK(maps.alpha_v.max_abs_diff(m2.alpha_v) <= 1e-6);

  // a sliver that covers no cell center degrades to the uniform map
  FocusMaps sliver = focus_maps(cfg, Box{0.30, 0.30, 0.34, 0.34}, std::nullopt, 3);
  CHECK(sliver.alpha_s.bit_equal(Tensor::ones({4}, DType::F64)));

  CHECK_THROWS_AS(focus_maps(cfg, Box{1.2, 1.2, 1.5, 1.5}, std::nullopt, 3), DataError);
  CHECK_THROWS_AS(focus_maps(cfg, std::nullopt, 7, 3), DataError);
  CHECK_THROWS_AS(focus_maps(cfg, std::nullopt, -1, 3), DataError);
}

TEST_CASE("apply_focus scales whole rows") {
  Tensor c = Tensor::from_values({3, 2}, {1, 2, 3, 4, 5, 6}, DType::F64);
  Var same = apply_focus(Var::constant(c), Tensor::ones({3}, DType::F64));
  CHECK(same.value().bit_equal(c));

  Tensor alpha = Tensor::from_values({3}, {2.0, 0.0, 1.0}, DType::F64);
  Var scaled = apply_focus(Var::constant(c), alpha);
  CHECK(scaled.value().at(0, 1) == 4.0);
  CHECK(scaled.value().at(1, 0) == 0.0);
  CHECK(scaled.value().at(2, 1) == 6.0);
}

TEST_CASE("image positional encoding matches the sinusoidal table") {
  ModelConfig cfg;
  cfg.raster_h = cfg.raster_w = 8;
  cfg.backbone_channels = {2, 2};  // stride 4 -> 2x2 grid
  cfg.d_model = 8;
  cfg.dtype = DType::F64;
  REQUIRE(cfg.grid_h() == 2);

  Tensor p = image_positional(cfg);
  REQUIRE(p.shape() == Shape{4, 8});
  CHECK(std::abs(p.at(0, 0) - 1.2246467991473532e-16) < 1e-18);
  CHECK(std::abs(p.at(0, 1) - -1.0) < 1e-15);
  CHECK(std::abs(p.at(0, 2) - 0.03141075907812829) < 1e-15);
  CHECK(std::abs(p.at(1, 4) - -2.4492935982947064e-16) < 1e-18);
  CHECK(std::abs(p.at(3, 5) - 1.0) < 1e-15);
  CHECK(std::abs(p.at(2, 7) - 0.9995065603657316) < 1e-15);

  CHECK(p.bit_equal(image_positional(cfg)));

  ModelConfig bad = cfg;
  bad.d_model = 10;  // not divisible by 4
  CHECK_THROWS_AS(image_positional(bad), NumericError);
}

TEST_CASE("node features mirror the hierarchy") {
  Screen s = hand_screen();
  Vocabulary vocab = build_vocabulary();
  NodeFeatures f = node_features(s, vocab);

  REQUIRE(f.count() == 4);
  CHECK(f.type_ids == std::vector<int>{type_id_by_name("column"), type_id_by_name("button"),
                                       type_id_by_name("label"), type_id_by_name("image")});
  CHECK(f.clickable == std::vector<int>{0, 1, 0, 0});
  CHECK(f.text_tokens[0].empty());
  CHECK(f.text_tokens[1] == std::vector<int>{vocab.id("save")});
  CHECK(f.text_tokens[2] == std::vector<int>{vocab.id("menu"), vocab.id("home")});
  CHECK(f.text_tokens[3].empty());
  CHECK(f.boxes[1] == std::array<double, 4>{0.10, 0.10, 0.45, 0.30});
  // (pre, post, depth): the root closes last
  CHECK(f.dom[0] == std::array<double, 3>{0, 3, 0});
  CHECK(f.dom[1] == std::array<double, 3>{1, 0, 1});
  CHECK(f.dom[2] == std::array<double, 3>{2, 1, 1});
  CHECK(f.dom[3] == std::array<double, 3>{3, 2, 1});
}

TEST_CASE("hierarchy content composes type, click and text embeddings") {
  ModelConfig cfg = micro_model(DType::F64);
  Vocabulary vocab = build_vocabulary();
  cfg.vocab_size = vocab.size();
  ParamStore params = embedder_params(cfg);
  GraphContext ctx(params, false, RngStream(0, "t"));

  Screen s = hand_screen();
  NodeFeatures f = node_features(s, vocab);
  Var content = hierarchy_content(ctx, cfg, f);
  REQUIRE(content.shape() == Shape{cfg.n_queries, cfg.d_model});

  const Tensor& e_type = params.tensor("embed.type");
  const Tensor& e_click = params.tensor("embed.click");
  const Tensor& e_tok = params.tensor("embed.tok");

  // image node (row 3): no text, so the row is exactly E_type + E_click
  int img = type_id_by_name("image");
  for (int64_t d = 0; d < cfg.d_model; ++d)
    CHECK(content.value().at(3, d) ==
          doctest::Approx(e_type.at(img, d) + e_click.at(0, d)).epsilon(1e-12));

  // label node (row 2): element-wise max over its two token embeddings
  int lab = type_id_by_name("label");
  int menu = vocab.id("menu"), home = vocab.id("home");
  for (int64_t d = 0; d < cfg.d_model; ++d) {
    double expect = e_type.at(lab, d) + e_click.at(0, d) +
                    std::max(e_tok.at(menu, d), e_tok.at(home, d));
    CHECK(content.value().at(2, d) == doctest::Approx(expect).epsilon(1e-12));
  }

  // rows past the node count are zero padding
  for (int64_t r = 4; r < cfg.n_queries; ++r)
    for (int64_t d = 0; d < cfg.d_model; ++d) CHECK(content.value().at(r, d) == 0.0);

  // permutation equivariance: reversing the nodes reverses the rows
  NodeFeatures rev;
  for (int i = f.count() - 1; i >= 0; --i) {
    rev.type_ids.push_back(f.type_ids[size_t(i)]);
    rev.clickable.push_back(f.clickable[size_t(i)]);
    rev.text_tokens.push_back(f.text_tokens[size_t(i)]);
    rev.boxes.push_back(f.boxes[size_t(i)]);
    rev.dom.push_back(f.dom[size_t(i)]);
  }
  Var content_rev = hierarchy_content(ctx, cfg, rev);
  for (int i = 0; i < 4; ++i)
    for (int64_t d = 0; d < cfg.d_model; ++d)
      CHECK(content_rev.value().at(3 - i, d) == content.value().at(i, d));

  // over-long hierarchies are rejected
  NodeFeatures big = f;
  while (big.count() <= cfg.n_queries) {
    big.type_ids.push_back(img);
    big.clickable.push_back(0);
    big.text_tokens.push_back({});
    big.boxes.push_back(f.boxes[0]);
    big.dom.push_back(f.dom[0]);
  }
  CHECK_THROWS_AS(hierarchy_content(ctx, cfg, big), DataError);
}

TEST_CASE("hierarchy positional encoding") {
  ModelConfig cfg = micro_model(DType::F64);
  Vocabulary vocab = build_vocabulary();
  cfg.vocab_size = vocab.size();
  ParamStore params = embedder_params(cfg);
  GraphContext ctx(params, false, RngStream(0, "t"));

  Screen s = hand_screen();
  NodeFeatures f = node_features(s, vocab);

  // pure function of the features
  Var a = hierarchy_positional(ctx, cfg, f, false);
  Var b = hierarchy_positional(ctx, cfg, f, false);
  REQUIRE(a.shape() == Shape{cfg.n_queries, cfg.d_model});
  CHECK(a.value().bit_equal(b.value()));

  // absent hierarchy: the learned per-slot query table, verbatim
  Var q = hierarchy_positional(ctx, cfg, f, true);
  CHECK(q.value().bit_equal(params.tensor("pe.query")));

  // identical boxes and dom at two nodes produce identical rows
  NodeFeatures twin = f;
  twin.boxes[2] = twin.boxes[1];
  twin.dom[2] = twin.dom[1];
  Var t = hierarchy_positional(ctx, cfg, twin, false);
  for (int64_t d = 0; d < cfg.d_model; ++d)
    CHECK(t.value().at(1, d) == t.value().at(2, d));

  // differentiable w.r.t. the Fourier projection and its MLP
  auto res = fd_check_params(
      params,
      [&](GraphContext& c) {
        Var pos = hierarchy_positional(c, cfg, f, false);
        return reduce_sum(mul(pos, pos));
      },
      4);
  CHECK(res.checked > 0);
  CHECK(res.max_rel <= 1e-4);
}

TEST_CASE("fused input offsets the modal streams") {
  ModelConfig cfg = micro_model(DType::F64);
  Vocabulary vocab = build_vocabulary();
  cfg.vocab_size = vocab.size();
  ParamStore params = embedder_params(cfg);
  GraphContext ctx(params, false, RngStream(0, "t"));

  int m = cfg.m_tokens(), n = cfg.n_queries, d = cfg.d_model;
  RngStream rng(4, "fuse");
  std::vector<double> cs(size_t(m * d)), cv(size_t(n * d)), pv(size_t(n * d));
  for (auto& v : cs) v = rng.uniform(-1, 1);
  for (auto& v : cv) v = rng.uniform(-1, 1);
  for (auto& v : pv) v = rng.uniform(-1, 1);
  Tensor p_s = image_positional(cfg);
  Var c_s = Var::constant(Tensor::from_values({m, d}, cs, DType::F64));
  Var c_v = Var::constant(Tensor::from_values({n, d}, cv, DType::F64));
  Var p_v = Var::constant(Tensor::from_values({n, d}, pv, DType::F64));

  FusedInput in = fuse(ctx, cfg, c_s, p_s, c_v, p_v, 3);
  REQUIRE(in.c.shape() == Shape{m + n, d});
  REQUIRE(in.p.shape() == Shape{m + n, d});
  CHECK(in.m == m);

  // content is plain concatenation
  CHECK(in.c.value().at(0, 0) == cs[0]);
  CHECK(in.c.value().at(m, 0) == cv[0]);

  // positional rows are offset by the matching modal embedding: the boundary
  // pair (last image row, first node row) uses E_s and E_v respectively
  const Tensor& es = params.tensor("modal.E_s");
  const Tensor& ev = params.tensor("modal.E_v");
  for (int64_t k = 0; k < d; ++k) {
    CHECK(in.p.value().at(m - 1, k) ==
          doctest::Approx(p_s.at(m - 1, k) + es.at(0, k)).epsilon(1e-12));
    CHECK(in.p.value().at(m, k) ==
          doctest::Approx(pv[size_t(k)] + ev.at(0, k)).epsilon(1e-12));
  }

  REQUIRE(in.valid.size() == size_t(m + n));
  for (int i = 0; i < m; ++i) CHECK(in.valid[size_t(i)]);
  CHECK(in.valid[size_t(m + 2)]);
  CHECK(!in.valid[size_t(m + 3)]);
}

TEST_CASE("image content embedding is deterministic and differentiable") {
  ModelConfig cfg = micro_model(DType::F64);
  ParamStore params = embedder_params(cfg);

  Screen s = hand_screen(16);
  Tensor raster = raster_to_tensor(s.raster).astype(DType::F64);

  GraphContext ctx(params, false, RngStream(0, "t"));
  Var y = image_content(ctx, cfg, raster);
  REQUIRE(y.shape() == Shape{cfg.m_tokens(), cfg.d_model});

  GraphContext ctx2(params, false, RngStream(9, "other"));
  CHECK(image_content(ctx2, cfg, raster).value().bit_equal(y.value()));

  Tensor wrong = Tensor::zeros({8, 8, 3}, DType::F64);
  GraphContext ctx3(params, false, RngStream(0, "t"));
  CHECK_THROWS_AS(image_content(ctx3, cfg, wrong), DataError);

  auto res = fd_check_params(
      params,
      [&](GraphContext& c) {
        Var h = image_content(c, cfg, raster);
        return reduce_sum(mul(h, h));
      },
      3);
  CHECK(res.checked > 0);
  CHECK(res.max_rel <= 1e-4);
}
