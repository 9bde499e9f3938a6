#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vut/corpus.hpp"
#include "vut/model.hpp"
#include "vut/model_config.hpp"

namespace vut {

// Everything a run needs, resolved from a plain key=value file (see
// docs/config-keys.md). Unknown keys are an error; the canonical serialization
// is embedded in every checkpoint so evaluation needs no external config.
struct RunConfig {
  ModelConfig model;
  CorpusConfig corpus;

  std::string corpus_dir = "corpus";
  std::string out_dir = "runs/default";
  uint64_t seed = 0;

  std::vector<Task> tasks{kAllTasks.begin(), kAllTasks.end()};
  std::vector<double> task_weights = {15, 10, 10, 20, 1};  // parallel to `tasks`

  int64_t phase1_steps = 5000;
  int64_t phase2_steps = 5000;
  int batch_size = 16;
  double lr_initial = 1e-4;
  int64_t lr_decay_step = 50000;
  double lr_decayed = 1e-5;
  double weight_decay = 1e-4;
  int64_t checkpoint_every = 1000;
  int64_t eval_every = 250;          // validation cadence (early stopping)
  int64_t early_stop_patience = 500;  // steps without val-F1 gain, tappable-only runs
};

// `text` is newline-separated `key = value` pairs; '#' starts a comment.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical form: every key, fixed order. parse(serialize(c)) == c.
std::string serialize_run_config(const RunConfig& cfg);

}  // namespace vut
