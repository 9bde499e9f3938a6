#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "vut/errors.hpp"
#include "vut/graph.hpp"
#include "vut/optimizer.hpp"
#include "vut/param_store.hpp"
#include "vut/rng.hpp"
#include "vut/tensor.hpp"

#include "test_util.hpp"

using namespace vut;
using vut::test::fd_check_inputs;

namespace {

Tensor rnd(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<double> vals(static_cast<size_t>(n));
  for (auto& v : vals) v = rng.uniform(lo, hi);
  return Tensor::from_values(std::move(shape), vals, DType::F64);
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, DType::F64);
  CHECK(t.rank() == 2);
  CHECK(t.numel() == 6);
  CHECK(t.at(1, 2) == 6.0);
  t.set(0, 1, -2.5);
  CHECK(t.at(0, 1) == -2.5);

  Tensor r = t.reshaped({3, 2});
  CHECK(r.at(2, 1) == 6.0);
  CHECK(t.at(0, 1) == -2.5);  // reshape does not alias writes back

  Tensor z = Tensor::zeros({4});
  CHECK(z.dtype() == DType::F32);
  CHECK(z.max_abs_diff(Tensor::full({4}, 0.0)) == 0.0);

  Tensor c = t.clone();
  CHECK(c.bit_equal(t));
  c.set(0, 0, 9.0);
  CHECK(!c.bit_equal(t));

  Tensor f = Tensor::from_values({2}, {0.1, 0.2}, DType::F32);
  Tensor d = f.astype(DType::F64);
  CHECK(d.dtype() == DType::F64);
  CHECK(d.at(0) == doctest::Approx(0.1).epsilon(1e-7));
}

TEST_CASE("rng streams are deterministic and independent") {
  RngStream a(42, "train/batch");
  RngStream b(42, "train/batch");
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());

  // child() does not consume from the parent, and the same child name keys
  // the same stream regardless of when it is derived.
  RngStream parent(7, "root");
  RngStream c1 = parent.child("step", {3});
  uint64_t before = RngStream(7, "root").next_u64();
  RngStream c2 = parent.child("step", {3});
  CHECK(parent.next_u64() == before);
  CHECK(c1.next_u64() == c2.next_u64());
  CHECK(parent.child("step", {3}).next_u64() != parent.child("step", {4}).next_u64());
  CHECK(parent.child("alpha").next_u64() != parent.child("beta").next_u64());

  RngStream u(1, "u");
  for (int i = 0; i < 1000; ++i) {
    double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }

  RngStream s(3, "shuffle");
  std::vector<int> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  s.shuffle(perm);
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 20; ++i) CHECK(sorted[size_t(i)] == i);
}

TEST_CASE("rng categorical follows its weights") {
  RngStream rng(11, "cat");
  std::vector<double> w = {1.0, 3.0, 0.5, 0.5};
  double total = 5.0;
  std::vector<int> counts(4, 0);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) ++counts[size_t(rng.categorical(w))];
  for (int k = 0; k < 4; ++k) {
    double expect = w[size_t(k)] / total;
    double got = double(counts[size_t(k)]) / draws;
    CHECK(std::abs(got - expect) < 0.015);
  }
}

TEST_CASE("op forward values match independent references") {
  // gelu, exact erf form
  Tensor x = Tensor::from_values({7}, {-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.5}, DType::F64);
  Var g = gelu(Var::constant(x));
  const double kGelu[] = {-0.00404969409489031, -0.15865525393145707, -0.15426876936299344,
                          0.0,                  0.34573123063700656,  0.8413447460685429,
                          2.4844758366855597};
  for (int i = 0; i < 7; ++i)
    CHECK(g.value().at(i) == doctest::Approx(kGelu[i]).epsilon(1e-12));

  Var sm = softmax_rows(Var::constant(Tensor::from_values({1, 4}, {1, 2, 4, 0.5}, DType::F64)));
  const double kSm[] = {0.04096623047659655, 0.11135775988499755, 0.8228287348414959,
                        0.024847274796909895};
  for (int j = 0; j < 4; ++j)
    CHECK(sm.value().at(0, j) == doctest::Approx(kSm[j]).epsilon(1e-12));
  double sum = 0;
  for (int j = 0; j < 4; ++j) sum += sm.value().at(0, j);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  Var ln = layer_norm_rows(Var::constant(Tensor::from_values({1, 4}, {1, 2, 3, 4}, DType::F64)),
                           Var::constant(Tensor::from_values({4}, {1, 1, 2, 1}, DType::F64)),
                           Var::constant(Tensor::from_values({4}, {0, 0, 0, 0.5}, DType::F64)));
  const double kLn[] = {-1.3416354199689269, -0.447211806656309, 0.894423613312618,
                        1.8416354199689269};
  for (int j = 0; j < 4; ++j)
    CHECK(ln.value().at(0, j) == doctest::Approx(kLn[j]).epsilon(1e-12));

  Var ce = cross_entropy_rows(
      Var::constant(Tensor::from_values({2, 3}, {2, 1, 0, 0, 1, 3}, DType::F64)), {0, 2});
  CHECK(ce.scalar() == doctest::Approx(0.2887259920003331).epsilon(1e-12));
  Var cew = cross_entropy_rows(
      Var::constant(Tensor::from_values({2, 3}, {2, 1, 0, 0, 1, 3}, DType::F64)), {0, 2},
      {1.0, 1.0, 0.1});
  CHECK(cew.scalar() == doctest::Approx(0.3859914240000083).epsilon(1e-12));

  // 3x3 all-ones kernel, stride 2, pad 1 over a 4x4 ramp
  std::vector<double> ramp(16);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  Var conv = conv2d(Var::constant(Tensor::from_values({4, 4, 1}, ramp, DType::F64)),
                    Var::constant(Tensor::ones({3, 3, 1, 1}, DType::F64)),
                    Var::constant(Tensor::from_values({1}, {0.5}, DType::F64)), 2, 1);
  REQUIRE(conv.shape() == Shape{2, 2, 1});
  const double kConv[] = {10.5, 24.5, 51.5, 90.5};
  for (int i = 0; i < 4; ++i)
    CHECK(conv.value().data<double>()[size_t(i)] == doctest::Approx(kConv[i]).epsilon(1e-12));
}

TEST_CASE("binary op broadcasting") {
  Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, DType::F64);
  Tensor row = Tensor::from_values({1, 3}, {10, 20, 30}, DType::F64);
  Tensor col = Tensor::from_values({2, 1}, {100, 200}, DType::F64);
  Tensor one = Tensor::from_values({1}, {0.5}, DType::F64);

  Var r = add(Var::constant(a), Var::constant(row));
  CHECK(r.value().at(1, 2) == 36.0);
  CHECK(r.value().at(0, 0) == 11.0);
  Var c = mul(Var::constant(a), Var::constant(col));
  CHECK(c.value().at(0, 2) == 300.0);
  CHECK(c.value().at(1, 0) == 800.0);
  Var s = sub(Var::constant(a), Var::constant(one));
  CHECK(s.value().at(0, 0) == 0.5);

  // gradients flow back through the broadcast (reduction over the expanded axis)
  auto res = fd_check_inputs({a, row}, [](const std::vector<Var>& in) {
    return reduce_sum(mul(add(in[0], in[1]), in[0]));
  });
  CHECK(res.max_rel <= 1e-4);
}

TEST_CASE("gradients match central differences") {
  RngStream rng(5, "fd-suite");
  auto check = [&](const char* what, std::vector<Tensor> ins,
                   std::function<Var(const std::vector<Var>&)> fn) {
    INFO(what);
    auto res = fd_check_inputs(ins, fn);
    CHECK(res.checked > 0);
    CHECK(res.max_rel <= 1e-4);
  };

  Tensor a23 = rnd({2, 3}, rng);
  Tensor b23 = rnd({2, 3}, rng, 0.5, 1.5);  // away from zero for div
  Tensor m24 = rnd({2, 4}, rng);
  Tensor m43 = rnd({4, 3}, rng);

  check("add", {a23, b23},
        [](const std::vector<Var>& i) { return reduce_sum(mul(add(i[0], i[1]), i[0])); });
  check("sub", {a23, b23},
        [](const std::vector<Var>& i) { return reduce_sum(mul(sub(i[0], i[1]), i[1])); });
  check("mul", {a23, b23},
        [](const std::vector<Var>& i) { return reduce_sum(mul(i[0], i[1])); });
  check("div", {a23, b23},
        [](const std::vector<Var>& i) { return reduce_sum(div(i[0], i[1])); });
  // keep operands separated so min/max kinks stay away from the probe
  Tensor lo = rnd({2, 3}, rng, -2.0, -1.0), hi = rnd({2, 3}, rng, 1.0, 2.0);
  check("minimum", {lo, hi},
        [](const std::vector<Var>& i) { return reduce_sum(mul(minimum(i[0], i[1]), i[0])); });
  check("maximum", {lo, hi},
        [](const std::vector<Var>& i) { return reduce_sum(mul(maximum(i[0], i[1]), i[1])); });
  check("neg/add_scalar/mul_scalar", {a23}, [](const std::vector<Var>& i) {
    return reduce_sum(mul_scalar(add_scalar(neg(i[0]), 0.7), 1.3));
  });

  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      Tensor a = ta ? rnd({4, 2}, rng) : m24;
      Tensor b = tb ? rnd({3, 4}, rng) : m43;
      check("matmul", {a, b}, [ta, tb](const std::vector<Var>& i) {
        return reduce_sum(matmul(i[0], i[1], ta, tb));
      });
      check("matmul_ordered", {a, b}, [ta, tb](const std::vector<Var>& i) {
        return reduce_sum(matmul_ordered(i[0], i[1], ta, tb));
      });
    }

  Tensor away = rnd({2, 3}, rng, 0.2, 1.0);
  Tensor awayn = rnd({2, 3}, rng, -1.0, -0.2);
  check("relu", {away, awayn}, [](const std::vector<Var>& i) {
    return reduce_sum(add(relu(i[0]), relu(i[1])));
  });
  check("abs_val", {away, awayn}, [](const std::vector<Var>& i) {
    return reduce_sum(add(abs_val(i[0]), abs_val(i[1])));
  });
  check("gelu/sigmoid/sin/cos", {a23}, [](const std::vector<Var>& i) {
    return reduce_sum(add(add(gelu(i[0]), sigmoid(i[0])), add(sin_of(i[0]), cos_of(i[0]))));
  });

  check("reshape", {m24}, [](const std::vector<Var>& i) {
    return reduce_sum(mul(reshape(i[0], {4, 2}), reshape(i[0], {4, 2})));
  });
  check("concat/slice rows", {a23, b23}, [](const std::vector<Var>& i) {
    Var cat = concat_rows({i[0], i[1]});
    return reduce_sum(mul(slice_rows(cat, 1, 2), slice_rows(cat, 0, 2)));
  });
  check("concat/slice cols", {a23, b23}, [](const std::vector<Var>& i) {
    Var cat = concat_cols({i[0], i[1]});
    return reduce_sum(mul(slice_cols(cat, 2, 3), slice_cols(cat, 1, 3)));
  });
  check("gather_rows accumulates over repeats", {m43}, [](const std::vector<Var>& i) {
    return reduce_sum(mul(gather_rows(i[0], {0, 2, 0}), gather_rows(i[0], {1, 1, 3})));
  });

  check("reduce_sum/mean", {a23}, [](const std::vector<Var>& i) {
    return add(reduce_sum(mul(i[0], i[0])), reduce_mean(i[0]));
  });
  Tensor spread = Tensor::from_values({3, 2}, {0.1, 2.0, 1.5, -0.5, -1.0, 0.9}, DType::F64);
  check("reduce_max_axis0", {spread}, [](const std::vector<Var>& i) {
    return reduce_sum(mul(reduce_max_axis0(i[0]), reduce_max_axis0(i[0])));
  });

  check("softmax_rows", {a23, b23}, [](const std::vector<Var>& i) {
    return reduce_sum(mul(softmax_rows(i[0]), i[1]));
  });
  Tensor gain = rnd({3}, rng, 0.5, 1.5), bias = rnd({3}, rng);
  check("layer_norm_rows", {a23, gain, bias}, [](const std::vector<Var>& i) {
    return reduce_sum(mul(layer_norm_rows(i[0], i[1], i[2]), i[0]));
  });
  check("normalize_global", {a23, b23}, [](const std::vector<Var>& i) {
    return reduce_sum(mul(normalize_global(i[0]), i[1]));
  });

  Tensor table = rnd({4, 3}, rng);
  check("embedding_rows", {table}, [](const std::vector<Var>& i) {
    return reduce_sum(mul(embedding_rows(i[0], {1, 0, 1}), embedding_rows(i[0], {2, 2, 3})));
  });

  Tensor img = rnd({4, 4, 2}, rng), ker = rnd({3, 3, 2, 3}, rng), cb = rnd({3}, rng);
  check("conv2d", {img, ker, cb}, [](const std::vector<Var>& i) {
    Var y = conv2d(i[0], i[1], i[2], 2, 1);
    return reduce_sum(mul(y, y));
  });

  check("cross_entropy_rows", {a23}, [](const std::vector<Var>& i) {
    return cross_entropy_rows(i[0], {2, 0}, {1.0, 0.5, 0.1});
  });

  Tensor alpha = Tensor::from_values({2}, {0.4, 1.7}, DType::F64);
  check("scale_rows", {a23}, [alpha](const std::vector<Var>& i) {
    return reduce_sum(mul(scale_rows(i[0], alpha), i[0]));
  });

  check("dropout (fixed mask)", {a23}, [](const std::vector<Var>& i) {
    RngStream r(9, "drop");
    return reduce_sum(mul(dropout(i[0], 0.5, r, true), i[0]));
  });

  check("add_all", {a23, b23, lo}, [](const std::vector<Var>& i) {
    return reduce_sum(add_all({i[0], i[1], i[2]}));
  });
}

TEST_CASE("dropout pass-through and scaling") {
  Tensor x = Tensor::from_values({2, 2}, {1, 2, 3, 4}, DType::F64);
  RngStream r(1, "d");
  Var ev = dropout(Var::constant(x), 0.5, r, false);
  CHECK(ev.value().bit_equal(x));
  Var z = dropout(Var::constant(x), 0.0, r, true);
  CHECK(z.value().bit_equal(x));

  RngStream r2(1, "d");
  Var tr = dropout(Var::constant(x), 0.5, r2, true);
  int zeros = 0;
  for (int64_t i = 0; i < 4; ++i) {
    double v = tr.value().data<double>()[size_t(i)];
    bool kept = v != 0.0;
    if (!kept) ++zeros;
    if (kept) CHECK(v == doctest::Approx(x.data<double>()[size_t(i)] * 2.0).epsilon(1e-12));
  }
  CHECK(zeros < 4);  // with this seed at least one survivor
}

TEST_CASE("finiteness guard reports the failing op") {
  Tensor num = Tensor::ones({2}, DType::F64);
  Tensor den = Tensor::from_values({2}, {1.0, 0.0}, DType::F64);
  CHECK_THROWS_AS(div(Var::constant(num), Var::constant(den)), NumericError);
  try {
    div(Var::constant(num), Var::constant(den));
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("div") != std::string::npos);
  }
}

TEST_CASE("ordered matmul keeps prefix rows stable") {
  RngStream rng(21, "ordered");
  Tensor a = rnd({6, 5}, rng), b = rnd({5, 4}, rng);
  Var full = matmul_ordered(Var::constant(a), Var::constant(b));

  for (int64_t t = 1; t <= 6; ++t) {
    std::vector<double> head(a.data<double>().begin(), a.data<double>().begin() + t * 5);
    Var part = matmul_ordered(Var::constant(Tensor::from_values({t, 5}, head, DType::F64)),
                              Var::constant(b));
    for (int64_t i = 0; i < t; ++i)
      for (int64_t j = 0; j < 4; ++j) {
        // bit-identical, not merely close
        CHECK(part.value().at(i, j) == full.value().at(i, j));
      }
  }

  // growing the shared axis through trans_b (keys gaining rows) keeps
  // existing output entries stable as well
  Tensor q = rnd({3, 5}, rng), k6 = rnd({6, 5}, rng);
  Var logits_full = matmul_ordered(Var::constant(q), Var::constant(k6), false, true);
  std::vector<double> khead(k6.data<double>().begin(), k6.data<double>().begin() + 4 * 5);
  Var logits_part = matmul_ordered(Var::constant(q),
                                   Var::constant(Tensor::from_values({4, 5}, khead, DType::F64)),
                                   false, true);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 4; ++j)
      CHECK(logits_part.value().at(i, j) == logits_full.value().at(i, j));
}

TEST_CASE("adamw follows the reference trajectory") {
  ParamStore params;
  params.add("w", Tensor::from_values({2}, {1.0, -2.0}, DType::F64));
  AdamWConfig cfg;
  cfg.lr = {0.1, 3, 0.01};
  AdamW opt(cfg);

  const std::vector<std::vector<double>> grads = {{0.5, -1.0}, {0.25, 0.5}, {-0.5, 0.1}};
  const std::vector<std::vector<double>> expect = {
      {0.899990002, -1.8999800009999999},
      {0.8067630405774424, -1.873327297570893},
      {0.8056544031267651, -1.87184444095261},
  };
  for (size_t t = 0; t < grads.size(); ++t) {
    opt.step(params, {{"w", Tensor::from_values({2}, grads[t], DType::F64)}});
    for (int j = 0; j < 2; ++j)
      CHECK(params.tensor("w").at(j) == doctest::Approx(expect[t][size_t(j)]).epsilon(1e-12));
  }
  CHECK(opt.step_count() == 3);
  CHECK(opt.last_lr() == 0.01);
  CHECK(opt.first_moments().at("w").at(0) ==
        doctest::Approx(0.012999999999999998).epsilon(1e-12));
  CHECK(opt.first_moments().at("w").at(1) == doctest::Approx(-0.026).epsilon(1e-12));
  CHECK(opt.second_moments().at("w").at(0) ==
        doctest::Approx(0.0005619377500000005).epsilon(1e-12));
  CHECK(opt.second_moments().at("w").at(1) ==
        doctest::Approx(0.0012577510000000012).epsilon(1e-12));
}

TEST_CASE("adamw per-parameter bias correction") {
  // Two parameters updated on alternating steps must follow the exact same
  // trajectory as one parameter updated every step with the same grads.
  ParamStore params;
  params.add("a", Tensor::from_values({1}, {1.0}, DType::F64));
  params.add("b", Tensor::from_values({1}, {1.0}, DType::F64));
  AdamWConfig cfg;
  cfg.lr = {0.1, -1, 0.0};
  AdamW opt(cfg);

  opt.step(params, {{"a", Tensor::from_values({1}, {0.3}, DType::F64)}});
  opt.step(params, {{"b", Tensor::from_values({1}, {0.3}, DType::F64)}});
  opt.step(params, {{"a", Tensor::from_values({1}, {-0.2}, DType::F64)}});
  opt.step(params, {{"b", Tensor::from_values({1}, {-0.2}, DType::F64)}});

  CHECK(params.tensor("a").at(0) == doctest::Approx(0.8855289510285635).epsilon(1e-12));
  CHECK(params.tensor("b").at(0) == doctest::Approx(0.8855289510285635).epsilon(1e-12));
  CHECK(opt.param_steps().at("a") == 2);
  CHECK(opt.param_steps().at("b") == 2);

  // a parameter with no gradient this step is not decayed either
  Tensor before = params.tensor("b").clone();
  opt.step(params, {{"a", Tensor::from_values({1}, {0.1}, DType::F64)}});
  CHECK(params.tensor("b").bit_equal(before));
}

TEST_CASE("lr schedule boundaries") {
  LrSchedule s{0.1, 5, 0.01};
  CHECK(s.at(1) == 0.1);
  CHECK(s.at(4) == 0.1);
  CHECK(s.at(5) == 0.01);
  CHECK(s.at(500) == 0.01);
  LrSchedule flat{0.2, -1, 0.0};
  CHECK(flat.at(1000000) == 0.2);
}
