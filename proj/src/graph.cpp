#include "vut/graph.hpp"

#include <atomic>
#include <stdexcept>
#include <utility>

#include "graph_internal.hpp"
#include "vut/errors.hpp"

namespace vut {

namespace {
std::atomic<bool> g_finite_checks{true};
}

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

void Node::accumulate_grad(const Tensor& g) {
  if (!grad.defined()) {
    grad = g.clone();
    return;
  }
  if (!grad.same_shape(g)) throw NumericError("gradient shape mismatch for op " + std::string(op));
  dispatch_dtype(grad.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto dst = grad.mutable_data<T>();
    auto src = g.data<T>();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  });
}

Tensor& Node::grad_buffer() {
  if (!grad.defined()) grad = Tensor::zeros(value.shape(), value.dtype());
  return grad;
}

Var Var::leaf(Tensor value, bool requires_grad, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->name = std::move(name);
  return Var(std::move(n));
}

double Var::scalar() const {
  if (node_->value.numel() != 1) throw NumericError("scalar() on tensor with more than one element");
  return node_->value.dtype() == DType::F32 ? double(node_->value.data<float>()[0])
                                            : node_->value.data<double>()[0];
}

namespace detail {

void check_finite(const char* op, const Tensor& t) {
  if (!g_finite_checks.load(std::memory_order_relaxed)) return;
  if (!t.all_finite()) throw NumericError(std::string("non-finite value produced by op ") + op);
}

Var make_op(const char* op, Tensor value, std::vector<NodePtr> inputs,
            std::function<void(Node&)> backward_fn) {
  check_finite(op, value);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  bool needs = false;
  for (const auto& in : inputs)
    if (in->requires_grad) needs = true;
  n->requires_grad = needs;
  if (needs) {
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(n));
}

}  // namespace detail

void backward(const Var& loss) {
  if (!loss.defined()) throw NumericError("backward on undefined value");
  if (loss.value().numel() != 1) throw NumericError("backward requires a scalar loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; graphs can be deep enough that recursion is
  // not worth the risk.
  std::vector<Node*> order;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  loss.node()->visited = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (!child->visited && child->requires_grad) {
        child->visited = true;
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad = Tensor::ones(loss.value().shape(), loss.value().dtype());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    n->visited = false;
    if (n->backward_fn && n->grad.defined()) n->backward_fn(*n);
  }
}

}  // namespace vut
