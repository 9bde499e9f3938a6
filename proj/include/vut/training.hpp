#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vut/corpus.hpp"
#include "vut/model.hpp"
#include "vut/optimizer.hpp"
#include "vut/run_config.hpp"

namespace vut {

// Weighted categorical draw over the task set.
Task sample_task(const std::vector<Task>& tasks, const std::vector<double>& weights,
                 RngStream& rng);

// Samples `batch_size` screens (with replacement) and instantiates one
// example of `task` on each.
std::vector<TaskExample> build_batch(Task task, const std::vector<const Screen*>& screens,
                                     const Vocabulary& vocab, int batch_size, RngStream& rng);

// One optimizer update on one batch. The batch loss is the mean of the
// per-example losses, accumulated in example order so the value is
// reproducible. Returns the batch loss.
double train_step(ParamStore& params, AdamW& opt, const ModelConfig& cfg,
                  const std::vector<TaskExample>& batch, const Vocabulary& vocab,
                  RngStream dropout_rng);

// Persists parameters, full optimizer state, and the canonical config text;
// `load_train_state` restores all of it bit-exactly into a store that was
// registered from the same config.
void save_train_checkpoint(const std::string& path, const RunConfig& cfg,
                           const ParamStore& params, const AdamW& opt, int64_t step,
                           double best_metric, int64_t best_step);

struct ResumeInfo {
  int64_t step = 0;
  double best_metric = -1.0;
  int64_t best_step = 0;
};
ResumeInfo load_train_state(const std::string& path, ParamStore& params, AdamW& opt);

// Parameters + config only (for eval / predict). The store is filled straight
// from the file, so it works without corpus-dependent registration.
struct LoadedModel {
  RunConfig cfg;
  ParamStore params;
  int64_t step = 0;
};
LoadedModel load_model(const std::string& path);

// Optional validation hook: returns a higher-is-better score. Used for early
// stopping when the run trains tappability alone.
using ValMetricFn = std::function<double(ParamStore&, const ModelConfig&, int64_t step)>;

struct TrainResult {
  int64_t final_step = 0;
  std::string final_checkpoint;
  bool stopped_early = false;
  double final_loss = 0.0;
};

// Phase 1 trains detection alone (skipped when the task set has no detect);
// phase 2 alternates tasks by weighted sampling. Writes `ckpt_{step}.vut`
// and `loss.jsonl` under cfg.out_dir. Steps are derived from counter-based
// streams keyed by the step number, so a resumed run replays the exact
// uninterrupted sequence.
TrainResult run_schedule(const RunConfig& cfg, const Corpus& corpus,
                         const std::string& resume_from = "", ValMetricFn val_metric = {});

}  // namespace vut
