#pragma once

#include <string>

#include "vut/corpus.hpp"
#include "vut/detection_metrics.hpp"
#include "vut/run_config.hpp"

namespace vut {

// The two detector shapes under comparison: a 12-layer single tower that
// reads image tokens and query slots together, and a DETR-shaped 6-layer
// image encoder followed by a 6-layer query decoder.
enum class BenchArch { Single12, EncDec6x6 };

BenchArch bench_arch_by_name(const std::string& name);
const std::string& bench_arch_name(BenchArch arch);

struct BenchResult {
  std::string arch;
  int64_t params = 0;
  int64_t steps = 0;
  double train_seconds = 0.0;
  std::string eval_split;
  DetectionSummary detect;
};

// Trains the chosen detector on the corpus (detection only, both schedule
// phases) and evaluates on the val split, falling back to train when the
// corpus has no val screens. Layer counts come from the arch name; the rest
// of the dimensions come from cfg.model.
BenchResult run_bench_detector(const RunConfig& cfg, const Corpus& corpus, BenchArch arch);

std::string bench_row_json(const BenchResult& result);

}  // namespace vut
