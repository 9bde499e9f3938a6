#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vut/param_store.hpp"
#include "vut/tensor.hpp"

namespace vut {

// Step-wise constant learning rate: `initial` before `decay_step`, `decayed`
// from that step on. Steps are 1-based; decay_step <= 0 disables the drop.
struct LrSchedule {
  double initial = 1e-4;
  int64_t decay_step = -1;
  double decayed = 1e-5;

  double at(int64_t step) const {
    return (decay_step > 0 && step >= decay_step) ? decayed : initial;
  }
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  LrSchedule lr;
};

// AdamW with decoupled weight decay. Parameters absent from the gradient map
// are left untouched (no decay either), which keeps task-path routing sharp.
// Bias correction uses per-parameter step counts, since alternating tasks
// update disjoint parameter subsets.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& params, const std::map<std::string, Tensor>& grads);

  int64_t step_count() const { return step_; }
  double last_lr() const { return last_lr_; }
  const AdamWConfig& config() const { return cfg_; }

  // Checkpoint plumbing.
  const std::map<std::string, Tensor>& first_moments() const { return m_; }
  const std::map<std::string, Tensor>& second_moments() const { return v_; }
  const std::map<std::string, int64_t>& param_steps() const { return t_; }
  void restore(int64_t step, std::map<std::string, Tensor> m, std::map<std::string, Tensor> v,
               std::map<std::string, int64_t> param_steps);

 private:
  AdamWConfig cfg_;
  int64_t step_ = 0;
  double last_lr_ = 0;
  std::map<std::string, Tensor> m_, v_;
  std::map<std::string, int64_t> t_;
};

}  // namespace vut
