#include "vut/param_store.hpp"

#include <cmath>

#include "vut/errors.hpp"

namespace vut {

void ParamStore::add(const std::string& name, Tensor t, bool trainable) {
  if (name.empty()) throw DataError("parameter name must be non-empty");
  auto [it, inserted] = entries_.emplace(name, Entry{std::move(t), trainable});
  if (!inserted) throw DataError("duplicate parameter name: " + name);
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw DataError("unknown parameter: " + name);
  return it->second;
}

Tensor& ParamStore::tensor(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw DataError("unknown parameter: " + name);
  return it->second.tensor;
}

const Tensor& ParamStore::tensor(const std::string& name) const { return at(name).tensor; }

bool ParamStore::trainable(const std::string& name) const { return at(name).trainable; }

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

int64_t ParamStore::value_count(bool trainable_only) const {
  int64_t n = 0;
  for (const auto& [k, v] : entries_)
    if (!trainable_only || v.trainable) n += v.tensor.numel();
  return n;
}

Var GraphContext::param(const std::string& name) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  bool rg = params_->trainable(name) && train_;
  Var v = Var::leaf(params_->tensor(name), rg, name);
  cache_.emplace(name, v);
  return v;
}

std::map<std::string, Tensor> GraphContext::grads() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, var] : cache_)
    if (var.node()->requires_grad && var.grad().defined()) out.emplace(name, var.grad());
  return out;
}

Tensor init_linear(int64_t fan_in, int64_t fan_out, RngStream& rng, DType dt) {
  double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  Tensor t = Tensor::zeros({fan_in, fan_out}, dt);
  dispatch_dtype(dt, [&](auto tag) {
    using T = decltype(tag);
    for (auto& x : t.mutable_data<T>()) x = T((rng.uniform() * 2.0 - 1.0) * limit);
  });
  return t;
}

Tensor init_conv(int64_t k, int64_t c_in, int64_t c_out, RngStream& rng, DType dt) {
  double sd = std::sqrt(2.0 / double(k * k * c_in));
  Tensor t = Tensor::zeros({k, k, c_in, c_out}, dt);
  dispatch_dtype(dt, [&](auto tag) {
    using T = decltype(tag);
    for (auto& x : t.mutable_data<T>()) x = T(rng.gaussian() * sd);
  });
  return t;
}

Tensor init_embedding(int64_t rows, int64_t cols, RngStream& rng, DType dt) {
  Tensor t = Tensor::zeros({rows, cols}, dt);
  dispatch_dtype(dt, [&](auto tag) {
    using T = decltype(tag);
    for (auto& x : t.mutable_data<T>()) x = T(rng.gaussian() * 0.02);
  });
  return t;
}

}  // namespace vut
