#pragma once

#include <array>
#include <string>
#include <vector>

#include "vut/corpus.hpp"
#include "vut/decoder.hpp"
#include "vut/embedders.hpp"
#include "vut/encoder.hpp"
#include "vut/heads.hpp"
#include "vut/model_config.hpp"

namespace vut {

enum class Task { Detect, Caption, Summarize, Ground, Tappable };

inline constexpr std::array<Task, 5> kAllTasks = {Task::Detect, Task::Caption, Task::Summarize,
                                                  Task::Ground, Task::Tappable};

const std::string& task_name(Task t);
Task task_by_name(const std::string& name);

// One training item. `answer` holds the teacher-forced tokens without the
// terminator; `target_idx` is the focus node (caption/tappable) or the
// grounding label (index into the flattened hierarchy).
struct TaskExample {
  Task task = Task::Detect;
  const Screen* screen = nullptr;
  int target_idx = -1;
  std::vector<int> question;
  std::vector<int> answer;
  std::vector<GtObject> objects;
};

// Samples the free choices (question wording, reference pick, focus node)
// from rng; pure given (task, screen, rng state).
TaskExample make_example(Task task, const Screen& screen, const Vocabulary& vocab,
                         RngStream& rng);

// Registers exactly the parameters the given task set touches.
void register_params(ParamStore& params, const ModelConfig& cfg, const std::vector<Task>& tasks,
                     uint64_t seed);

struct EncodedScreen {
  Var memory;              // [(M+N), d_model]
  Var h_s;                 // image rows
  Var h_v;                 // node/query rows
  Tensor memory_bias;      // [1, M+N] or undefined when nothing is padded
  std::vector<bool> node_valid;
  int n_valid = 0;
};

EncodedScreen encode_screen(GraphContext& ctx, const ModelConfig& cfg, const Screen& screen,
                            const Vocabulary& vocab, Task task, int target_idx);

Var example_loss(GraphContext& ctx, const ModelConfig& cfg, const TaskExample& ex,
                 const Vocabulary& vocab);

std::vector<DetectedObject> predict_objects(ParamStore& params, const ModelConfig& cfg,
                                            const Screen& screen, const Vocabulary& vocab);

// Greedy decode after the question; stops at the terminator or the length cap.
std::vector<int> predict_answer(ParamStore& params, const ModelConfig& cfg, const Screen& screen,
                                const Vocabulary& vocab, Task task, int target_idx,
                                const std::vector<int>& question);

int predict_target(ParamStore& params, const ModelConfig& cfg, const Screen& screen,
                   const Vocabulary& vocab, const std::vector<int>& command);

}  // namespace vut
