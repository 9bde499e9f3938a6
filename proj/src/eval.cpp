#include "vut/eval.hpp"

#include <nlohmann/json.hpp>

#include "vut/errors.hpp"
#include "vut/text_metrics.hpp"

namespace vut {

double grounding_accuracy(const std::vector<int>& predicted, const std::vector<int>& expected) {
  if (predicted.size() != expected.size())
    throw UsageError("prediction and label lists must be the same length");
  if (predicted.empty()) return 0.0;
  int64_t hits = 0;
  for (size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == expected[i];
  return 100.0 * double(hits) / double(predicted.size());
}

Prf tappability_prf(const std::vector<bool>& predicted_yes, const std::vector<bool>& actual_yes) {
  if (predicted_yes.size() != actual_yes.size())
    throw UsageError("prediction and label lists must be the same length");
  double tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < predicted_yes.size(); ++i) {
    tp += predicted_yes[i] && actual_yes[i];
    fp += predicted_yes[i] && !actual_yes[i];
    fn += !predicted_yes[i] && actual_yes[i];
  }
  Prf out;
  out.precision = tp + fp > 0 ? 100.0 * tp / (tp + fp) : 0.0;
  out.recall = tp + fn > 0 ? 100.0 * tp / (tp + fn) : 0.0;
  out.f1 = out.precision + out.recall > 0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

namespace {

bool same_tokens(const std::string& a, const std::string& b) {
  return Vocabulary::split(a) == Vocabulary::split(b);
}

TextBlock text_block(const std::vector<std::string>& candidates,
                     const std::vector<std::vector<std::string>>& references) {
  TextBlock block;
  block.n_examples = int(candidates.size());
  if (candidates.empty()) return block;
  block.bleu1 = 100.0 * bleu(candidates, references, 1);
  block.bleu2 = 100.0 * bleu(candidates, references, 2);
  block.bleu3 = 100.0 * bleu(candidates, references, 3);
  block.bleu4 = 100.0 * bleu(candidates, references, 4);
  block.rouge_l = 100.0 * rouge_l(candidates, references);
  block.cider = cider_d(candidates, references);
  int64_t exact = 0;
  for (size_t i = 0; i < candidates.size(); ++i)
    for (const auto& ref : references[i])
      if (same_tokens(candidates[i], ref)) {
        ++exact;
        break;
      }
  block.exact_match = 100.0 * double(exact) / double(candidates.size());
  return block;
}

}  // namespace

EvalReport evaluate(ParamStore& params, const ModelConfig& cfg, const Corpus& corpus,
                    const std::string& split, const std::vector<Task>& tasks, int64_t step) {
  auto screens = corpus.split_screens(split);
  if (screens.empty()) throw DataError("split '" + split + "' has no screens");
  const Vocabulary& vocab = corpus.vocab;
  RngStream questions(0, "eval/questions");

  EvalReport report;
  report.split = split;
  report.step = step;

  for (Task task : tasks) {
    switch (task) {
      case Task::Detect: {
        std::vector<std::vector<ScoredBox>> preds;
        std::vector<std::vector<LabeledBox>> gts;
        for (const Screen* s : screens) {
          std::vector<ScoredBox> p;
          for (const auto& d : predict_objects(params, cfg, *s, vocab))
            p.push_back({d.type_id, d.bbox, d.score});
          std::vector<LabeledBox> g;
          for (const auto& o : gt_objects(*s)) g.push_back({o.type_id, o.bbox});
          preds.push_back(std::move(p));
          gts.push_back(std::move(g));
        }
        report.detect = ap_metrics(preds, gts);
        report.detect_screens = int(screens.size());
        break;
      }
      case Task::Caption: {
        std::vector<std::string> cands;
        std::vector<std::vector<std::string>> refs;
        for (const Screen* s : screens)
          for (const auto& [idx, caps] : s->captions) {
            auto rng = questions.child(s->screen_id).child("caption", {uint64_t(idx)});
            auto q = vocab.encode(make_question("caption", rng));
            auto ans = predict_answer(params, cfg, *s, vocab, Task::Caption, idx, q);
            cands.push_back(vocab.decode(ans));
            refs.push_back(caps);
          }
        report.caption = text_block(cands, refs);
        break;
      }
      case Task::Summarize: {
        std::vector<std::string> cands;
        std::vector<std::vector<std::string>> refs;
        for (const Screen* s : screens) {
          if (s->summaries.empty()) continue;
          auto rng = questions.child(s->screen_id).child("summary");
          auto q = vocab.encode(make_question("summarize", rng));
          auto ans = predict_answer(params, cfg, *s, vocab, Task::Summarize, -1, q);
          cands.push_back(vocab.decode(ans));
          refs.push_back(s->summaries);
        }
        report.summarize = text_block(cands, refs);
        break;
      }
      case Task::Ground: {
        std::vector<int> pred, want;
        for (const Screen* s : screens)
          for (const auto& cmd : s->commands) {
            pred.push_back(predict_target(params, cfg, *s, vocab, vocab.encode(cmd.phrase)));
            want.push_back(cmd.target_idx);
          }
        report.ground_acc = grounding_accuracy(pred, want);
        report.ground_n = int(pred.size());
        break;
      }
      case Task::Tappable: {
        const int yes_id = vocab.id("yes");
        std::vector<bool> pred, actual;
        for (const Screen* s : screens)
          for (size_t idx = 0; idx < s->flattened.size(); ++idx) {
            auto rng = questions.child(s->screen_id).child("tappable", {uint64_t(idx)});
            auto q = vocab.encode(make_question("tappable", rng));
            auto ans = predict_answer(params, cfg, *s, vocab, Task::Tappable, int(idx), q);
            pred.push_back(!ans.empty() && ans[0] == yes_id);
            actual.push_back(s->tappable[idx]);
          }
        report.tappable = tappability_prf(pred, actual);
        int64_t agree = 0;
        for (size_t i = 0; i < pred.size(); ++i) agree += pred[i] == actual[i];
        report.tappable_accuracy = pred.empty() ? 0.0 : 100.0 * double(agree) / double(pred.size());
        report.tappable_n = int(pred.size());
        break;
      }
    }
  }
  return report;
}

std::string report_json(const EvalReport& report) {
  nlohmann::json j;
  j["split"] = report.split;
  j["step"] = report.step;
  if (report.detect) {
    j["detect"] = {{"ap", report.detect->ap},
                   {"ap50", report.detect->ap50},
                   {"ap75", report.detect->ap75},
                   {"ap_small", report.detect->ap_small},
                   {"ap_medium", report.detect->ap_medium},
                   {"ap_large", report.detect->ap_large},
                   {"n_screens", report.detect_screens}};
  }
  auto text_json = [](const TextBlock& b) {
    return nlohmann::json{{"bleu1", b.bleu1},
                          {"bleu2", b.bleu2},
                          {"bleu3", b.bleu3},
                          {"bleu4", b.bleu4},
                          {"rouge_l", b.rouge_l},
                          {"cider", b.cider},
                          {"exact_match", b.exact_match},
                          {"n_examples", b.n_examples}};
  };
  if (report.caption) j["caption"] = text_json(*report.caption);
  if (report.summarize) j["summarize"] = text_json(*report.summarize);
  if (report.ground_acc) j["ground"] = {{"accuracy", *report.ground_acc}, {"n_examples", report.ground_n}};
  if (report.tappable) {
    j["tappable"] = {{"precision", report.tappable->precision},
                     {"recall", report.tappable->recall},
                     {"f1", report.tappable->f1},
                     {"accuracy", report.tappable_accuracy},
                     {"n_examples", report.tappable_n}};
  }
  return j.dump(2) + "\n";
}

}  // namespace vut
