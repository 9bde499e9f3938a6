#pragma once

#include <map>
#include <string>
#include <vector>

#include "vut/graph.hpp"
#include "vut/rng.hpp"
#include "vut/tensor.hpp"

namespace vut {

// Named parameter tensors with deterministic (lexicographic) iteration.
class ParamStore {
 public:
  struct Entry {
    Tensor tensor;
    bool trainable = true;
  };

  void add(const std::string& name, Tensor t, bool trainable = true);
  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& tensor(const std::string& name);
  const Tensor& tensor(const std::string& name) const;
  bool trainable(const std::string& name) const;

  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }
  int64_t value_count(bool trainable_only = true) const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  const Entry& at(const std::string& name) const;
  std::map<std::string, Entry> entries_;
};

// Builds one computation graph over a store: leaves are cached per name so a
// parameter used twice accumulates into a single gradient, and dropout draws
// come from one stream owned by the context.
class GraphContext {
 public:
  GraphContext(ParamStore& params, bool train, RngStream dropout_rng)
      : params_(&params), train_(train), rng_(std::move(dropout_rng)) {}

  Var param(const std::string& name);
  bool train() const { return train_; }
  RngStream& dropout_rng() { return rng_; }
  const ParamStore& store() const { return *params_; }

  // Gradients of every trainable parameter touched by the last backward().
  std::map<std::string, Tensor> grads() const;

 private:
  ParamStore* params_;
  bool train_;
  RngStream rng_;
  std::map<std::string, Var> cache_;
};

// Initializers. Each parameter is drawn from its own named stream, so values
// do not depend on registration order.
Tensor init_linear(int64_t fan_in, int64_t fan_out, RngStream& rng, DType dt = DType::F32);
Tensor init_conv(int64_t k, int64_t c_in, int64_t c_out, RngStream& rng, DType dt = DType::F32);
Tensor init_embedding(int64_t rows, int64_t cols, RngStream& rng, DType dt = DType::F32);

}  // namespace vut
