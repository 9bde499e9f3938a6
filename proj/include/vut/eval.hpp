#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vut/corpus.hpp"
#include "vut/detection_metrics.hpp"
#include "vut/model.hpp"

namespace vut {

// Percentage of exact index hits.
double grounding_accuracy(const std::vector<int>& predicted, const std::vector<int>& expected);

// Precision / recall / F1 on the positive class, as percentages.
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};
Prf tappability_prf(const std::vector<bool>& predicted_yes, const std::vector<bool>& actual_yes);

// Generation metrics for one task, display-scaled: BLEU/ROUGE x100,
// CIDEr-D on its native 0..10 scale, exact match as a percentage.
struct TextBlock {
  double bleu1 = 0.0, bleu2 = 0.0, bleu3 = 0.0, bleu4 = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  double exact_match = 0.0;
  int n_examples = 0;
};

struct EvalReport {
  std::string split;
  int64_t step = 0;
  std::optional<DetectionSummary> detect;
  int detect_screens = 0;
  std::optional<TextBlock> caption;
  std::optional<TextBlock> summarize;
  std::optional<double> ground_acc;
  int ground_n = 0;
  std::optional<Prf> tappable;
  double tappable_accuracy = 0.0;
  int tappable_n = 0;
};

// Runs greedy-decode inference over every example the split defines for the
// requested tasks: one detection pass per screen, one caption per captioned
// node, one summary per screen, every stored command, every node's
// tappability question. Question wording is drawn from streams keyed by
// screen id and node index, so repeated evaluations see identical inputs.
EvalReport evaluate(ParamStore& params, const ModelConfig& cfg, const Corpus& corpus,
                    const std::string& split, const std::vector<Task>& tasks, int64_t step = 0);

std::string report_json(const EvalReport& report);

}  // namespace vut
