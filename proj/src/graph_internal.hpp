#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "vut/graph.hpp"

namespace vut::detail {

// Wraps a freshly computed value into a node, wiring inputs and the backward
// closure only when some input needs gradients. Enforces the finiteness
// invariant for every op output.
Var make_op(const char* op, Tensor value, std::vector<NodePtr> inputs,
            std::function<void(Node&)> backward_fn);

void check_finite(const char* op, const Tensor& t);

}  // namespace vut::detail
