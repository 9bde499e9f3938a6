#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vut/rng.hpp"
#include "vut/tensor.hpp"

namespace vut {

class Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of a reverse-mode tape. Nodes are created through the op
// functions below and freed when the last Var handle goes away.
class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::string name;  // parameter name for leaves
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;
  bool visited = false;  // topo-sort scratch; graphs are single-threaded

  void accumulate_grad(const Tensor& g);
  Tensor& grad_buffer();  // zeros of value's shape on first use
};

// Value-semantic handle to a node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var leaf(Tensor value, bool requires_grad = false, std::string name = "");
  static Var constant(Tensor value) { return leaf(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t dim(int i) const { return node_->value.dim(i); }
  DType dtype() const { return node_->value.dtype(); }
  bool requires_grad() const { return node_->requires_grad; }
  double scalar() const;  // value of a single-element tensor

  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

// Runs reverse-mode accumulation from a scalar loss.
void backward(const Var& loss);

// Per-op finiteness guard (hard error on NaN/Inf, reporting the op name).
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// ---- ops ------------------------------------------------------------------
// Binary ops broadcast [n,m] with [1,m], [n,1] or [1]; shapes otherwise match.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);

Var neg(const Var& a);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);

Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
// Matmul through the fixed-accumulation kernel: rows already computed do not
// change bits when the operands later grow (autoregressive decoding).
Var matmul_ordered(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);

Var relu(const Var& a);
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var abs_val(const Var& a);
Var sin_of(const Var& a);
Var cos_of(const Var& a);

Var reshape(const Var& a, Shape shape);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int64_t start, int64_t len);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, int64_t start, int64_t len);
Var gather_rows(const Var& a, std::vector<int64_t> ids);

Var reduce_sum(const Var& a);
Var reduce_mean(const Var& a);
Var reduce_max_axis0(const Var& a);  // [n,m] -> [1,m], column-wise max

Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);
Var normalize_global(const Var& a, double eps = 1e-5);

Var embedding_rows(const Var& table, const std::vector<int>& ids);

// x: [H,W,Cin], w: [k,k,Cin,Cout], bias: [Cout]; zero padding.
Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad);

Var dropout(const Var& a, double rate, RngStream& rng, bool train);

// Row-wise scaling by constants: y[i,:] = alpha[i] * a[i,:].
Var scale_rows(const Var& a, const Tensor& alpha);

// Mean cross-entropy over rows of logits vs integer targets; optional
// per-class weights give the weighted mean (sum w_t CE / sum w_t).
Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets,
                       const std::vector<double>& class_weights = {});

Var add_all(const std::vector<Var>& vs);

}  // namespace vut
