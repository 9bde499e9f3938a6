#include "vut/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vut/checkpoint.hpp"
#include "vut/errors.hpp"

namespace vut {

Task sample_task(const std::vector<Task>& tasks, const std::vector<double>& weights,
                 RngStream& rng) {
  if (tasks.empty() || weights.size() != tasks.size())
    throw UsageError("task and weight lists must be parallel and non-empty");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw UsageError("task weights must be non-negative");
    sum += w;
  }
  if (sum <= 0.0) throw UsageError("all task weights are zero");
  return tasks[rng.categorical(weights)];
}

std::vector<TaskExample> build_batch(Task task, const std::vector<const Screen*>& screens,
                                     const Vocabulary& vocab, int batch_size, RngStream& rng) {
  if (screens.empty()) throw DataError("split has no screens");
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  std::vector<TaskExample> batch;
  batch.reserve(static_cast<size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    const Screen& s = *screens[size_t(rng.uniform_int(int64_t(screens.size())))];
    batch.push_back(make_example(task, s, vocab, rng));
  }
  return batch;
}

double train_step(ParamStore& params, AdamW& opt, const ModelConfig& cfg,
                  const std::vector<TaskExample>& batch, const Vocabulary& vocab,
                  RngStream dropout_rng) {
  if (batch.empty()) throw UsageError("empty batch");
  GraphContext ctx(params, true, std::move(dropout_rng));
  std::vector<Var> losses;
  losses.reserve(batch.size());
  for (const auto& ex : batch) losses.push_back(example_loss(ctx, cfg, ex, vocab));
  Var loss = mul_scalar(add_all(losses), 1.0 / double(batch.size()));
  backward(loss);
  opt.step(params, ctx.grads());
  double v = loss.scalar();
  if (!std::isfinite(v)) throw NumericError("non-finite training loss");
  return v;
}

namespace {

Tensor scalar_f64(double v) { return Tensor::scalar(v, DType::F64); }

int64_t entry_i64(const Checkpoint& ck, const std::string& key) {
  auto it = ck.entries.find(key);
  if (it == ck.entries.end()) throw DataError("checkpoint is missing entry: " + key);
  return std::llround(it->second.at(0));
}

}  // namespace

void save_train_checkpoint(const std::string& path, const RunConfig& cfg,
                           const ParamStore& params, const AdamW& opt, int64_t step,
                           double best_metric, int64_t best_step) {
  Checkpoint ck;
  ck.config_text = serialize_run_config(cfg);
  for (const auto& [name, entry] : params) ck.entries["param/" + name] = entry.tensor;
  for (const auto& [name, m] : opt.first_moments()) ck.entries["optim/m/" + name] = m;
  for (const auto& [name, v] : opt.second_moments()) ck.entries["optim/v/" + name] = v;
  for (const auto& [name, t] : opt.param_steps())
    ck.entries["optim/t/" + name] = scalar_f64(double(t));
  ck.entries["train/step"] = scalar_f64(double(step));
  ck.entries["train/opt_step"] = scalar_f64(double(opt.step_count()));
  ck.entries["train/best_metric"] = scalar_f64(best_metric);
  ck.entries["train/best_step"] = scalar_f64(double(best_step));
  save_checkpoint(path, ck);
}

ResumeInfo load_train_state(const std::string& path, ParamStore& params, AdamW& opt) {
  Checkpoint ck = load_checkpoint(path);

  size_t stored_params = 0;
  for (const auto& [key, t] : ck.entries)
    if (key.rfind("param/", 0) == 0) ++stored_params;
  if (stored_params != params.size())
    throw DataError("checkpoint parameter set does not match the configured tasks");
  for (const auto& name : params.names()) {
    auto it = ck.entries.find("param/" + name);
    if (it == ck.entries.end()) throw DataError("checkpoint is missing parameter: " + name);
    Tensor& dst = params.tensor(name);
    if (it->second.shape() != dst.shape() || it->second.dtype() != dst.dtype())
      throw DataError("checkpoint parameter " + name + " has shape " +
                      shape_str(it->second.shape()) + ", expected " + shape_str(dst.shape()));
    dst = it->second;
  }

  std::map<std::string, Tensor> m, v;
  std::map<std::string, int64_t> t;
  for (const auto& [key, tensor] : ck.entries) {
    if (key.rfind("optim/m/", 0) == 0) m[key.substr(8)] = tensor;
    else if (key.rfind("optim/v/", 0) == 0) v[key.substr(8)] = tensor;
    else if (key.rfind("optim/t/", 0) == 0) t[key.substr(8)] = std::llround(tensor.at(0));
  }
  opt.restore(entry_i64(ck, "train/opt_step"), std::move(m), std::move(v), std::move(t));

  ResumeInfo info;
  info.step = entry_i64(ck, "train/step");
  info.best_metric = ck.entries.at("train/best_metric").at(0);
  info.best_step = entry_i64(ck, "train/best_step");
  return info;
}

LoadedModel load_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  LoadedModel lm;
  lm.cfg = parse_run_config(ck.config_text);
  for (const auto& [key, tensor] : ck.entries)
    if (key.rfind("param/", 0) == 0) lm.params.add(key.substr(6), tensor);
  if (lm.params.size() == 0) throw DataError("checkpoint holds no parameters: " + path);
  lm.step = entry_i64(ck, "train/step");
  return lm;
}

TrainResult run_schedule(const RunConfig& run, const Corpus& corpus,
                         const std::string& resume_from, ValMetricFn val_metric) {
  if (run.batch_size < 1) throw UsageError("batch size must be >= 1");
  if (run.phase1_steps < 0 || run.phase2_steps < 0)
    throw UsageError("phase step counts must be non-negative");
  if (run.tasks.empty()) throw UsageError("no tasks selected");
  if (run.task_weights.size() != run.tasks.size())
    throw UsageError("task_weights must list one weight per task");

  ModelConfig mc = run.model;
  mc.vocab_size = corpus.vocab.size();

  auto train_screens = corpus.split_screens("train");
  if (train_screens.empty()) throw DataError("training split is empty");

  bool has_detect = false;
  for (Task t : run.tasks) has_detect |= t == Task::Detect;
  const int64_t phase1 = has_detect ? run.phase1_steps : 0;
  const int64_t total = phase1 + run.phase2_steps;

  ParamStore params;
  register_params(params, mc, run.tasks, run.seed);
  AdamWConfig oc;
  oc.weight_decay = run.weight_decay;
  oc.lr = {run.lr_initial, run.lr_decay_step, run.lr_decayed};
  AdamW opt(oc);

  int64_t start = 0;
  double best = -1.0;
  int64_t best_step = 0;
  if (!resume_from.empty()) {
    if (load_checkpoint(resume_from).config_text != serialize_run_config(run))
      throw UsageError("resume config differs from the checkpoint's embedded config");
    ResumeInfo info = load_train_state(resume_from, params, opt);
    start = info.step;
    best = info.best_metric;
    best_step = info.best_step;
    if (start > total) throw UsageError("checkpoint step is past the end of the schedule");
  }

  std::filesystem::create_directories(run.out_dir);
  std::ofstream log(run.out_dir + "/loss.jsonl",
                    resume_from.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw DataError("cannot write loss log under " + run.out_dir);

  const bool early_stop = run.early_stop_patience > 0 && val_metric && run.tasks.size() == 1 &&
                          run.tasks[0] == Task::Tappable;

  RngStream task_root(run.seed, "train/tasks");
  RngStream batch_root(run.seed, "train/batch");
  RngStream drop_root(run.seed, "train/dropout");

  TrainResult res;
  int64_t saved_at = -1;
  auto save_at = [&](int64_t step) {
    std::string path = run.out_dir + "/ckpt_" + std::to_string(step) + ".vut";
    save_train_checkpoint(path, run, params, opt, step, best, best_step);
    res.final_checkpoint = path;
    saved_at = step;
  };

  int64_t step = start;
  while (step < total) {
    ++step;
    Task task = Task::Detect;
    if (step > phase1) {
      auto r = task_root.child("step", {uint64_t(step)});
      task = sample_task(run.tasks, run.task_weights, r);
    }
    auto brng = batch_root.child("step", {uint64_t(step)});
    auto batch = build_batch(task, train_screens, corpus.vocab, run.batch_size, brng);
    res.final_loss = train_step(params, opt, mc, batch, corpus.vocab,
                                drop_root.child("step", {uint64_t(step)}));

    nlohmann::json line{{"step", step},
                        {"task", task_name(task)},
                        {"loss", res.final_loss},
                        {"lr", opt.last_lr()}};
    log << line.dump() << "\n";
    log.flush();

    if (early_stop && run.eval_every > 0 && step % run.eval_every == 0) {
      double metric = val_metric(params, mc, step);
      if (metric > best) {
        best = metric;
        best_step = step;
      } else if (step - best_step >= run.early_stop_patience) {
        res.stopped_early = true;
      }
    }
    if ((run.checkpoint_every > 0 && step % run.checkpoint_every == 0) || step == total ||
        res.stopped_early)
      save_at(step);
    if (res.stopped_early) break;
  }

  res.final_step = step;
  if (saved_at != step) save_at(step);
  return res;
}

}  // namespace vut
