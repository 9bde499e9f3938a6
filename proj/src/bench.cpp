#include "vut/bench.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vut/errors.hpp"
#include "vut/eval.hpp"
#include "vut/render.hpp"
#include "vut/training.hpp"

namespace vut {

namespace {

const std::string kArchNames[] = {"single12", "encdec6x6"};

Var ln(GraphContext& ctx, const std::string& prefix, const Var& x) {
  return layer_norm_rows(x, ctx.param(prefix + ".gain"), ctx.param(prefix + ".bias"));
}

// DETR-shaped decoder: zero-initialized query states; the learned query table
// acts as their positional stream, added to q/k every layer, while image
// positions are re-added to the cross-attention keys.
Var detr_forward(GraphContext& ctx, const ModelConfig& mc, const Screen& screen) {
  Var c = image_content(ctx, mc, raster_to_tensor(screen.raster));
  Var p = add(Var::constant(image_positional(mc)), ctx.param("modal.E_s"));
  FusedInput in;
  in.c = c;
  in.p = p;
  in.m = mc.m_tokens();
  in.valid.assign(size_t(mc.m_tokens()), true);
  Var mem = encoder_forward(ctx, mc, in);

  Var qpos = ctx.param("detr.query");
  Var x = Var::constant(Tensor::zeros({mc.n_queries, mc.d_model}, mc.dtype));
  Tensor no_bias;
  for (int l = 0; l < 6; ++l) {
    std::string prefix = "detr.layer" + std::to_string(l);
    Var h = ln(ctx, prefix + ".ln1", x);
    Var qk = add(h, qpos);
    x = add(x, multihead_attention(ctx, prefix + ".self", mc.heads, qk, qk, h, no_bias,
                                   mc.attn_dropout));
    h = ln(ctx, prefix + ".ln2", x);
    x = add(x, multihead_attention(ctx, prefix + ".cross", mc.heads, add(h, qpos), add(mem, p),
                                   mem, no_bias, mc.attn_dropout));
    h = ln(ctx, prefix + ".ln3", x);
    Var m = gelu(add(matmul(h, ctx.param(prefix + ".mlp.w1")), ctx.param(prefix + ".mlp.b1")));
    m = add(matmul(m, ctx.param(prefix + ".mlp.w2")), ctx.param(prefix + ".mlp.b2"));
    m = dropout(m, mc.mlp_dropout, ctx.dropout_rng(), ctx.train());
    x = add(x, m);
  }
  return x;
}

void register_detr_params(ParamStore& params, const ModelConfig& mc, uint64_t seed) {
  RngStream init(seed, "model/init");
  register_image_embedder_params(params, mc, init);
  register_encoder_params(params, mc, init);
  {
    RngStream s = init.child("init/detr.query");
    params.add("detr.query", init_embedding(mc.n_queries, mc.d_model, s, mc.dtype));
  }
  for (int l = 0; l < 6; ++l) {
    std::string prefix = "detr.layer" + std::to_string(l);
    for (const char* n : {".ln1", ".ln2", ".ln3"}) {
      params.add(prefix + n + ".gain", Tensor::ones({1, mc.d_model}, mc.dtype));
      params.add(prefix + n + ".bias", Tensor::zeros({1, mc.d_model}, mc.dtype));
    }
    register_attention_params(params, prefix + ".self", mc.d_model, mc.qkv_dim, mc.heads, init,
                              mc.dtype);
    register_attention_params(params, prefix + ".cross", mc.d_model, mc.qkv_dim, mc.heads, init,
                              mc.dtype);
    RngStream s = init.child("init/" + prefix + ".mlp");
    params.add(prefix + ".mlp.w1", init_linear(mc.d_model, mc.mlp_dim, s, mc.dtype));
    params.add(prefix + ".mlp.b1", Tensor::zeros({1, mc.mlp_dim}, mc.dtype));
    params.add(prefix + ".mlp.w2", init_linear(mc.mlp_dim, mc.d_model, s, mc.dtype));
    params.add(prefix + ".mlp.b2", Tensor::zeros({1, mc.d_model}, mc.dtype));
  }
  register_detection_head_params(params, mc, init);
}

std::string pick_eval_split(const Corpus& corpus) {
  return corpus.split_screens("val").empty() ? "train" : "val";
}

BenchResult bench_single12(const RunConfig& cfg, const Corpus& corpus) {
  RunConfig c = cfg;
  c.tasks = {Task::Detect};
  c.task_weights = {1.0};
  c.model.enc_layers = 12;
  c.out_dir = cfg.out_dir + "/single12";

  auto t0 = std::chrono::steady_clock::now();
  TrainResult tr = run_schedule(c, corpus);
  auto t1 = std::chrono::steady_clock::now();

  LoadedModel lm = load_model(tr.final_checkpoint);
  ModelConfig mc = c.model;
  mc.vocab_size = corpus.vocab.size();

  BenchResult out;
  out.arch = kArchNames[0];
  out.params = lm.params.value_count();
  out.steps = tr.final_step;
  out.train_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.eval_split = pick_eval_split(corpus);
  out.detect = *evaluate(lm.params, mc, corpus, out.eval_split, {Task::Detect}).detect;
  return out;
}

BenchResult bench_encdec(const RunConfig& cfg, const Corpus& corpus) {
  ModelConfig mc = cfg.model;
  mc.enc_layers = 6;
  mc.vocab_size = corpus.vocab.size();

  auto train_screens = corpus.split_screens("train");
  if (train_screens.empty()) throw DataError("training split is empty");

  ParamStore params;
  register_detr_params(params, mc, cfg.seed);
  AdamWConfig oc;
  oc.weight_decay = cfg.weight_decay;
  oc.lr = {cfg.lr_initial, cfg.lr_decay_step, cfg.lr_decayed};
  AdamW opt(oc);

  std::string out_dir = cfg.out_dir + "/encdec6x6";
  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir + "/loss.jsonl", std::ios::trunc);

  const int64_t total = cfg.phase1_steps + cfg.phase2_steps;
  RngStream batch_root(cfg.seed, "train/batch");
  RngStream drop_root(cfg.seed, "train/dropout");

  auto t0 = std::chrono::steady_clock::now();
  for (int64_t step = 1; step <= total; ++step) {
    auto brng = batch_root.child("step", {uint64_t(step)});
    auto batch = build_batch(Task::Detect, train_screens, corpus.vocab, cfg.batch_size, brng);
    GraphContext ctx(params, true, drop_root.child("step", {uint64_t(step)}));
    std::vector<Var> losses;
    losses.reserve(batch.size());
    for (const auto& ex : batch) {
      DetectionOutput det = detect_head(ctx, mc, detr_forward(ctx, mc, *ex.screen));
      losses.push_back(detection_loss(det, ex.objects, hungarian_match(det, ex.objects)));
    }
    Var loss = mul_scalar(add_all(losses), 1.0 / double(batch.size()));
    backward(loss);
    opt.step(params, ctx.grads());
    nlohmann::json line{
        {"step", step}, {"task", "detect"}, {"loss", loss.scalar()}, {"lr", opt.last_lr()}};
    log << line.dump() << "\n";
  }
  auto t1 = std::chrono::steady_clock::now();

  BenchResult out;
  out.arch = kArchNames[1];
  out.params = params.value_count();
  out.steps = total;
  out.train_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.eval_split = pick_eval_split(corpus);

  std::vector<std::vector<ScoredBox>> preds;
  std::vector<std::vector<LabeledBox>> gts;
  for (const Screen* s : corpus.split_screens(out.eval_split)) {
    GraphContext ctx(params, false, RngStream(0, "eval/dropout"));
    DetectionOutput det = detect_head(ctx, mc, detr_forward(ctx, mc, *s));
    std::vector<ScoredBox> p;
    for (const auto& d : decode_detections(det.type_logits.value(), det.boxes.value()))
      p.push_back({d.type_id, d.bbox, d.score});
    std::vector<LabeledBox> g;
    for (const auto& o : gt_objects(*s)) g.push_back({o.type_id, o.bbox});
    preds.push_back(std::move(p));
    gts.push_back(std::move(g));
  }
  out.detect = ap_metrics(preds, gts);
  return out;
}

}  // namespace

BenchArch bench_arch_by_name(const std::string& name) {
  if (name == kArchNames[0]) return BenchArch::Single12;
  if (name == kArchNames[1]) return BenchArch::EncDec6x6;
  throw UsageError("unknown arch '" + name + "' (expected single12 or encdec6x6)");
}

const std::string& bench_arch_name(BenchArch arch) {
  static const std::string names[] = {kArchNames[0], kArchNames[1]};
  return names[size_t(arch)];
}

BenchResult run_bench_detector(const RunConfig& cfg, const Corpus& corpus, BenchArch arch) {
  return arch == BenchArch::Single12 ? bench_single12(cfg, corpus) : bench_encdec(cfg, corpus);
}

std::string bench_row_json(const BenchResult& r) {
  nlohmann::json j{{"arch", r.arch},
                   {"params", r.params},
                   {"steps", r.steps},
                   {"train_seconds", r.train_seconds},
                   {"split", r.eval_split},
                   {"detect",
                    {{"ap", r.detect.ap},
                     {"ap50", r.detect.ap50},
                     {"ap75", r.detect.ap75},
                     {"ap_small", r.detect.ap_small},
                     {"ap_medium", r.detect.ap_medium},
                     {"ap_large", r.detect.ap_large}}}};
  return j.dump() + "\n";
}

}  // namespace vut
