#include "vut/model.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <set>

#include "vut/errors.hpp"
#include "vut/render.hpp"

namespace vut {

const std::string& task_name(Task t) {
  static const std::string names[] = {"detect", "caption", "summarize", "ground", "tappable"};
  return names[size_t(t)];
}

Task task_by_name(const std::string& name) {
  for (Task t : kAllTasks)
    if (task_name(t) == name) return t;
  throw UsageError("unknown task: " + name +
                   " (expected detect, caption, summarize, ground or tappable)");
}

TaskExample make_example(Task task, const Screen& screen, const Vocabulary& vocab,
                         RngStream& rng) {
  TaskExample ex;
  ex.task = task;
  ex.screen = &screen;
  switch (task) {
    case Task::Detect:
      ex.objects = gt_objects(screen);
      break;
    case Task::Caption: {
      if (screen.captions.empty())
        throw DataError("screen " + screen.screen_id + " has no captioned widgets");
      std::vector<int> keys;
      keys.reserve(screen.captions.size());
      for (const auto& [idx, refs] : screen.captions) keys.push_back(idx);
      ex.target_idx = keys[size_t(rng.uniform_int(int64_t(keys.size())))];
      const auto& refs = screen.captions.at(ex.target_idx);
      ex.question = vocab.encode(make_question("caption", rng));
      ex.answer = vocab.encode(refs[size_t(rng.uniform_int(int64_t(refs.size())))]);
      break;
    }
    case Task::Summarize: {
      if (screen.summaries.empty())
        throw DataError("screen " + screen.screen_id + " has no summaries");
      ex.question = vocab.encode(make_question("summarize", rng));
      ex.answer =
          vocab.encode(screen.summaries[size_t(rng.uniform_int(int64_t(screen.summaries.size())))]);
      break;
    }
    case Task::Ground: {
      if (screen.commands.empty())
        throw DataError("screen " + screen.screen_id + " has no commands");
      const Command& cmd =
          screen.commands[size_t(rng.uniform_int(int64_t(screen.commands.size())))];
      ex.question = vocab.encode(cmd.phrase);
      ex.target_idx = cmd.target_idx;
      break;
    }
    case Task::Tappable: {
      if (screen.tappable.size() != screen.flattened.size())
        throw DataError("screen " + screen.screen_id + " is missing tappability labels");
      ex.target_idx = int(rng.uniform_int(int64_t(screen.flattened.size())));
      ex.question = vocab.encode(make_question("tappable", rng));
      ex.answer = {vocab.id(screen.tappable[size_t(ex.target_idx)] ? "yes" : "no")};
      break;
    }
  }
  return ex;
}

void register_params(ParamStore& params, const ModelConfig& cfg, const std::vector<Task>& tasks,
                     uint64_t seed) {
  if (tasks.empty()) throw UsageError("no tasks selected");
  std::set<Task> set(tasks.begin(), tasks.end());
  bool detect = set.count(Task::Detect) != 0;
  bool text = set.count(Task::Caption) || set.count(Task::Summarize) || set.count(Task::Tappable);
  bool ground = set.count(Task::Ground) != 0;

  RngStream init(seed, "model/init");
  register_image_embedder_params(params, cfg, init);
  register_encoder_params(params, cfg, init);
  if (detect) {
    register_query_slot_params(params, cfg, init);
    register_detection_head_params(params, cfg, init);
  }
  if (text || ground) {
    register_hierarchy_embedder_params(params, cfg, init);
    register_decoder_params(params, cfg, init);
  }
  if (text) register_text_head_params(params, cfg, init);
  if (ground) register_pointer_head_params(params, cfg, init);
}

EncodedScreen encode_screen(GraphContext& ctx, const ModelConfig& cfg, const Screen& screen,
                            const Vocabulary& vocab, Task task, int target_idx) {
  bool absent_hierarchy = task == Task::Detect;
  NodeFeatures nodes;
  if (!absent_hierarchy) nodes = node_features(screen, vocab);
  int n_valid = absent_hierarchy ? cfg.n_queries : nodes.count();

  std::optional<Box> t_bbx;
  std::optional<int> t_idx;
  if (task == Task::Caption || task == Task::Tappable) {
    if (target_idx < 0 || target_idx >= nodes.count())
      throw DataError("focus target outside the hierarchy of " + screen.screen_id);
    t_bbx = screen.flattened[size_t(target_idx)]->bbox;
    t_idx = target_idx;
  }

  Var c_s = image_content(ctx, cfg, raster_to_tensor(screen.raster));
  Tensor p_s = image_positional(cfg);
  Var c_v = hierarchy_content(ctx, cfg, nodes);
  Var p_v = hierarchy_positional(ctx, cfg, nodes, absent_hierarchy);

  FocusMaps focus = focus_maps(cfg, t_bbx, t_idx, n_valid);
  c_s = apply_focus(c_s, focus.alpha_s);
  c_v = apply_focus(c_v, focus.alpha_v);

  FusedInput fused = fuse(ctx, cfg, c_s, p_s, c_v, p_v, n_valid);
  EncodedScreen out;
  out.memory = encoder_forward(ctx, cfg, fused);
  out.h_s = slice_rows(out.memory, 0, cfg.m_tokens());
  out.h_v = slice_rows(out.memory, cfg.m_tokens(), cfg.n_queries);
  out.memory_bias = attention_bias(fused.valid, cfg.dtype);
  out.node_valid.assign(fused.valid.begin() + cfg.m_tokens(), fused.valid.end());
  out.n_valid = n_valid;
  return out;
}

Var example_loss(GraphContext& ctx, const ModelConfig& cfg, const TaskExample& ex,
                 const Vocabulary& vocab) {
  if (!ex.screen) throw DataError("example does not reference a screen");
  EncodedScreen enc = encode_screen(ctx, cfg, *ex.screen, vocab, ex.task, ex.target_idx);

  switch (ex.task) {
    case Task::Detect: {
      DetectionOutput det = detect_head(ctx, cfg, enc.h_v);
      MatchAssignment match = hungarian_match(det, ex.objects);
      return detection_loss(det, ex.objects, match);
    }
    case Task::Ground: {
      Var g = decoder_forward(ctx, cfg, ex.question, enc.memory, enc.memory_bias);
      PointerResult ptr =
          pointer_scores(ctx, g, int(ex.question.size()), enc.h_v, enc.node_valid);
      if (ex.target_idx < 0 || ex.target_idx >= enc.n_valid)
        throw DataError("grounding label outside the hierarchy of " + ex.screen->screen_id);
      return cross_entropy_rows(ptr.logits, {ex.target_idx});
    }
    case Task::Caption:
    case Task::Summarize:
    case Task::Tappable: {
      if (ex.answer.empty()) throw DataError("text task without an answer");
      std::vector<int> tokens = ex.question;
      tokens.insert(tokens.end(), ex.answer.begin(), ex.answer.end());
      Var g = decoder_forward(ctx, cfg, tokens, enc.memory, enc.memory_bias);
      Var logits =
          text_step_logits(ctx, g, int(ex.question.size()), int(ex.answer.size()) + 1);
      std::vector<int> targets = ex.answer;
      targets.push_back(Vocabulary::kEos);
      return cross_entropy_rows(logits, targets);
    }
  }
  throw DataError("unhandled task");
}

std::vector<DetectedObject> predict_objects(ParamStore& params, const ModelConfig& cfg,
                                            const Screen& screen, const Vocabulary& vocab) {
  GraphContext ctx(params, false, RngStream(0, "eval/dropout"));
  EncodedScreen enc = encode_screen(ctx, cfg, screen, vocab, Task::Detect, -1);
  DetectionOutput det = detect_head(ctx, cfg, enc.h_v);
  return decode_detections(det.type_logits.value(), det.boxes.value());
}

std::vector<int> predict_answer(ParamStore& params, const ModelConfig& cfg, const Screen& screen,
                                const Vocabulary& vocab, Task task, int target_idx,
                                const std::vector<int>& question) {
  if (question.empty()) throw DataError("cannot decode without a question");
  GraphContext ctx(params, false, RngStream(0, "eval/dropout"));
  EncodedScreen enc = encode_screen(ctx, cfg, screen, vocab, task, target_idx);
  // The encoder graph is finished; decode steps only need its values.
  Var mem = Var::constant(enc.memory.value());

  std::vector<int> tokens = question;
  std::vector<int> answer;
  while (int64_t(tokens.size()) < cfg.max_len) {
    Var g = decoder_forward(ctx, cfg, tokens, mem, enc.memory_bias);
    Var logits = text_step_logits(ctx, g, int(tokens.size()), 1);
    const Tensor& row = logits.value();
    int next = 0;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t c = 0; c < row.dim(1); ++c)
      if (row.at(0, c) > mx) {
        mx = row.at(0, c);
        next = int(c);
      }
    if (next == Vocabulary::kEos) break;
    answer.push_back(next);
    tokens.push_back(next);
  }
  return answer;
}

int predict_target(ParamStore& params, const ModelConfig& cfg, const Screen& screen,
                   const Vocabulary& vocab, const std::vector<int>& command) {
  if (command.empty()) throw DataError("cannot ground an empty command");
  GraphContext ctx(params, false, RngStream(0, "eval/dropout"));
  EncodedScreen enc = encode_screen(ctx, cfg, screen, vocab, Task::Ground, -1);
  Var g = decoder_forward(ctx, cfg, command, enc.memory, enc.memory_bias);
  PointerResult ptr = pointer_scores(ctx, g, int(command.size()), enc.h_v, enc.node_valid);
  return ptr.best;
}

}  // namespace vut
