#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <utility>

#include "graph_internal.hpp"
#include "vut/errors.hpp"
#include "vut/gemm.hpp"
#include "vut/graph.hpp"

namespace vut {

using detail::make_op;

namespace {

enum class Bcast { Same, Scalar, Row, Col };

// How operand shape `s` maps onto output shape `out`.
Bcast classify(const Shape& out, const Shape& s, const char* op) {
  if (s == out) return Bcast::Same;
  if (shape_numel(s) == 1) return Bcast::Scalar;
  if (out.size() == 2 && s.size() == 2) {
    if (s[0] == 1 && s[1] == out[1]) return Bcast::Row;
    if (s[0] == out[0] && s[1] == 1) return Bcast::Col;
  }
  throw NumericError(std::string(op) + ": cannot broadcast " + shape_str(s) + " to " + shape_str(out));
}

// Flat output index -> flat operand index under a broadcast pattern.
struct IndexMap {
  Bcast b;
  int64_t cols;
  int64_t operator()(int64_t i) const {
    switch (b) {
      case Bcast::Same: return i;
      case Bcast::Scalar: return 0;
      case Bcast::Row: return i % cols;
      case Bcast::Col: return i / cols;
    }
    return 0;
  }
};

void require_same_dtype(const Var& a, const Var& b, const char* op) {
  if (a.dtype() != b.dtype())
    throw NumericError(std::string(op) + ": dtype mismatch (" + dtype_name(a.dtype()) + " vs " +
                       dtype_name(b.dtype()) + ")");
}

// Elementwise binary op with limited broadcasting. FwdF computes the value;
// DaF/DbF give local derivative factors as functions of (a, b, y).
template <class FwdF, class DaF, class DbF>
Var binary_op(const char* op, const Var& a, const Var& b, FwdF f, DaF da, DbF db) {
  require_same_dtype(a, b, op);
  const Shape& out_shape = shape_numel(a.shape()) >= shape_numel(b.shape()) ? a.shape() : b.shape();
  Bcast ba = classify(out_shape, a.shape(), op);
  Bcast bb = classify(out_shape, b.shape(), op);
  int64_t cols = out_shape.size() == 2 ? out_shape[1] : 1;
  IndexMap ia{ba, cols}, ib{bb, cols};

  Tensor out = Tensor::zeros(out_shape, a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto av = a.value().template data<T>();
    auto bv = b.value().template data<T>();
    auto y = out.template mutable_data<T>();
    for (int64_t i = 0; i < int64_t(y.size()); ++i)
      y[i] = T(f(double(av[ia(i)]), double(bv[ib(i)])));
  });

  return make_op(op, std::move(out), {a.node(), b.node()}, [ia, ib, da, db](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    const Tensor& bv = n.inputs[1]->value;
    dispatch_dtype(av.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      auto ap = av.template data<T>();
      auto bp = bv.template data<T>();
      auto yp = n.value.template data<T>();
      if (n.inputs[0]->requires_grad) {
        auto ga = n.inputs[0]->grad_buffer().template mutable_data<T>();
        for (int64_t i = 0; i < int64_t(g.size()); ++i)
          ga[ia(i)] += T(double(g[i]) * da(double(ap[ia(i)]), double(bp[ib(i)]), double(yp[i])));
      }
      if (n.inputs[1]->requires_grad) {
        auto gb = n.inputs[1]->grad_buffer().template mutable_data<T>();
        for (int64_t i = 0; i < int64_t(g.size()); ++i)
          gb[ib(i)] += T(double(g[i]) * db(double(ap[ia(i)]), double(bp[ib(i)]), double(yp[i])));
      }
    });
  });
}

// Elementwise unary op; DxF gives the local derivative from (x, y).
template <class FwdF, class DxF>
Var unary_op(const char* op, const Var& a, FwdF f, DxF dx) {
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto av = a.value().template data<T>();
    auto y = out.template mutable_data<T>();
    for (size_t i = 0; i < y.size(); ++i) y[i] = T(f(double(av[i])));
  });
  return make_op(op, std::move(out), {a.node()}, [dx](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      auto xv = n.inputs[0]->value.template data<T>();
      auto yv = n.value.template data<T>();
      auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
      for (size_t i = 0; i < g.size(); ++i) gx[i] += T(double(g[i]) * dx(double(xv[i]), double(yv[i])));
    });
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

// Ties route the gradient to the first operand.
Var minimum(const Var& a, const Var& b) {
  return binary_op(
      "minimum", a, b, [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Var maximum(const Var& a, const Var& b) {
  return binary_op(
      "maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Var neg(const Var& a) {
  return unary_op(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var add_scalar(const Var& a, double s) {
  return unary_op(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var mul_scalar(const Var& a, double s) {
  return unary_op(
      "mul_scalar", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var relu(const Var& a) {
  return unary_op(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var gelu(const Var& a) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  return unary_op(
      "gelu", a, [=](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [=](double x, double) {
        return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
      });
}

Var sigmoid(const Var& a) {
  return unary_op(
      "sigmoid", a,
      [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var abs_val(const Var& a) {
  return unary_op(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var sin_of(const Var& a) {
  return unary_op(
      "sin", a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var cos_of(const Var& a) {
  return unary_op(
      "cos", a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

namespace {

Var matmul_impl(const Var& a, const Var& b, bool trans_a, bool trans_b, bool ordered,
                const char* opname) {
  require_same_dtype(a, b, opname);
  if (a.shape().size() != 2 || b.shape().size() != 2)
    throw NumericError(std::string(opname) + ": operands must be rank-2, got " +
                       shape_str(a.shape()) + " and " + shape_str(b.shape()));
  int64_t m = trans_a ? a.dim(1) : a.dim(0);
  int64_t ka = trans_a ? a.dim(0) : a.dim(1);
  int64_t kb = trans_b ? b.dim(1) : b.dim(0);
  int64_t n = trans_b ? b.dim(0) : b.dim(1);
  if (ka != kb)
    throw NumericError(std::string(opname) + ": inner dimensions disagree, " +
                       shape_str(a.shape()) + (trans_a ? "^T" : "") + " * " +
                       shape_str(b.shape()) + (trans_b ? "^T" : ""));

  Tensor out = Tensor::zeros({m, n}, a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto mm = ordered ? ordered_gemm<T> : gemm<T>;
    mm(trans_a, trans_b, m, n, ka, T(1), a.value().template data<T>().data(),
       b.value().template data<T>().data(), T(0), out.template mutable_data<T>().data());
  });

  return make_op(opname, std::move(out), {a.node(), b.node()}, [=](Node& nd) {
    const Tensor& av = nd.inputs[0]->value;
    const Tensor& bv = nd.inputs[1]->value;
    dispatch_dtype(av.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto mm = ordered ? ordered_gemm<T> : gemm<T>;
      const T* gp = nd.grad.template data<T>().data();
      const T* ap = av.template data<T>().data();
      const T* bp = bv.template data<T>().data();
      if (nd.inputs[0]->requires_grad) {
        T* ga = nd.inputs[0]->grad_buffer().template mutable_data<T>().data();
        if (!trans_a && !trans_b) mm(false, true, m, ka, n, T(1), gp, bp, T(1), ga);
        else if (!trans_a && trans_b) mm(false, false, m, ka, n, T(1), gp, bp, T(1), ga);
        else if (trans_a && !trans_b) mm(false, true, ka, m, n, T(1), bp, gp, T(1), ga);
        else mm(true, true, ka, m, n, T(1), bp, gp, T(1), ga);
      }
      if (nd.inputs[1]->requires_grad) {
        T* gb = nd.inputs[1]->grad_buffer().template mutable_data<T>().data();
        if (!trans_a && !trans_b) mm(true, false, ka, n, m, T(1), ap, gp, T(1), gb);
        else if (!trans_a && trans_b) mm(true, false, n, ka, m, T(1), gp, ap, T(1), gb);
        else if (trans_a && !trans_b) mm(false, false, ka, n, m, T(1), ap, gp, T(1), gb);
        else mm(true, true, n, ka, m, T(1), gp, ap, T(1), gb);
      }
    });
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  return matmul_impl(a, b, trans_a, trans_b, false, "matmul");
}

Var matmul_ordered(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  return matmul_impl(a, b, trans_a, trans_b, true, "matmul_ordered");
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(shape);
  return make_op("reshape", std::move(out), {a.node()}, [](Node& n) {
    n.inputs[0]->accumulate_grad(n.grad.reshaped(n.inputs[0]->value.shape()));
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw NumericError("concat_rows: no inputs");
  int64_t cols = parts[0].shape().size() == 2 ? parts[0].dim(1) : 1;
  int64_t rows = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.dim(1) != cols || p.dtype() != parts[0].dtype())
      throw NumericError("concat_rows: incompatible part " + shape_str(p.shape()));
    rows += p.dim(0);
  }
  Tensor out = Tensor::zeros({rows, cols}, parts[0].dtype());
  std::vector<NodePtr> ins;
  std::vector<int64_t> offsets;
  int64_t at = 0;
  dispatch_dtype(parts[0].dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto y = out.template mutable_data<T>();
    for (const auto& p : parts) {
      auto v = p.value().template data<T>();
      std::copy(v.begin(), v.end(), y.begin() + at * cols);
      ins.push_back(p.node());
      offsets.push_back(at);
      at += p.dim(0);
    }
  });
  return make_op("concat_rows", std::move(out), std::move(ins), [offsets, cols](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      for (size_t i = 0; i < n.inputs.size(); ++i) {
        if (!n.inputs[i]->requires_grad) continue;
        auto gi = n.inputs[i]->grad_buffer().template mutable_data<T>();
        const T* src = g.data() + offsets[i] * cols;
        for (size_t j = 0; j < gi.size(); ++j) gi[j] += src[j];
      }
    });
  });
}

Var slice_rows(const Var& a, int64_t start, int64_t len) {
  if (a.shape().size() != 2) throw NumericError("slice_rows: rank-2 input required");
  if (start < 0 || len < 0 || start + len > a.dim(0))
    throw NumericError("slice_rows: range out of bounds");
  int64_t cols = a.dim(1);
  Tensor out = Tensor::zeros({len, cols}, a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = a.value().template data<T>();
    auto y = out.template mutable_data<T>();
    std::copy(v.begin() + start * cols, v.begin() + (start + len) * cols, y.begin());
  });
  return make_op("slice_rows", std::move(out), {a.node()}, [start, cols](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
      for (size_t j = 0; j < g.size(); ++j) gx[start * cols + j] += g[j];
    });
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw NumericError("concat_cols: no inputs");
  int64_t rows = parts[0].shape().size() == 2 ? parts[0].dim(0) : -1;
  int64_t cols = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.dim(0) != rows || p.dtype() != parts[0].dtype())
      throw NumericError("concat_cols: incompatible part " + shape_str(p.shape()));
    cols += p.dim(1);
  }
  Tensor out = Tensor::zeros({rows, cols}, parts[0].dtype());
  std::vector<NodePtr> ins;
  std::vector<int64_t> offsets;
  std::vector<int64_t> widths;
  int64_t at = 0;
  dispatch_dtype(parts[0].dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto y = out.template mutable_data<T>();
    for (const auto& p : parts) {
      auto v = p.value().template data<T>();
      int64_t w = p.dim(1);
      for (int64_t r = 0; r < rows; ++r)
        std::copy(v.begin() + r * w, v.begin() + (r + 1) * w, y.begin() + r * cols + at);
      ins.push_back(p.node());
      offsets.push_back(at);
      widths.push_back(w);
      at += w;
    }
  });
  return make_op("concat_cols", std::move(out), std::move(ins), [offsets, widths, rows, cols](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      for (size_t i = 0; i < n.inputs.size(); ++i) {
        if (!n.inputs[i]->requires_grad) continue;
        auto gi = n.inputs[i]->grad_buffer().template mutable_data<T>();
        int64_t w = widths[i];
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t j = 0; j < w; ++j) gi[r * w + j] += g[r * cols + offsets[i] + j];
      }
    });
  });
}

Var slice_cols(const Var& a, int64_t start, int64_t len) {
  if (a.shape().size() != 2) throw NumericError("slice_cols: rank-2 input required");
  if (start < 0 || len < 0 || start + len > a.dim(1))
    throw NumericError("slice_cols: range out of bounds");
  int64_t rows = a.dim(0), cols = a.dim(1);
  Tensor out = Tensor::zeros({rows, len}, a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = a.value().template data<T>();
    auto y = out.template mutable_data<T>();
    for (int64_t r = 0; r < rows; ++r)
      std::copy(v.begin() + r * cols + start, v.begin() + r * cols + start + len, y.begin() + r * len);
  });
  return make_op("slice_cols", std::move(out), {a.node()}, [start, len, rows, cols](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < len; ++j) gx[r * cols + start + j] += g[r * len + j];
    });
  });
}

Var gather_rows(const Var& a, std::vector<int64_t> ids) {
  if (a.shape().size() != 2) throw NumericError("gather_rows: rank-2 input required");
  int64_t rows = a.dim(0), cols = a.dim(1);
  for (int64_t id : ids)
    if (id < 0 || id >= rows) throw NumericError("gather_rows: index out of range");
  Tensor out = Tensor::zeros({int64_t(ids.size()), cols}, a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = a.value().template data<T>();
    auto y = out.template mutable_data<T>();
    for (size_t i = 0; i < ids.size(); ++i)
      std::copy(v.begin() + ids[i] * cols, v.begin() + (ids[i] + 1) * cols, y.begin() + int64_t(i) * cols);
  });
  return make_op("gather_rows", std::move(out), {a.node()}, [ids = std::move(ids), cols](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
      for (size_t i = 0; i < ids.size(); ++i)
        for (int64_t j = 0; j < cols; ++j) gx[ids[i] * cols + j] += g[int64_t(i) * cols + j];
    });
  });
}

Var reduce_sum(const Var& a) {
  Tensor out = Tensor::zeros({1}, a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = a.value().template data<T>();
    double s = 0;
    for (T x : v) s += double(x);
    out.template mutable_data<T>()[0] = T(s);
  });
  return make_op("reduce_sum", std::move(out), {a.node()}, [](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      T g = n.grad.template data<T>()[0];
      auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
      for (auto& x : gx) x += g;
    });
  });
}

Var reduce_mean(const Var& a) {
  int64_t count = a.value().numel();
  return mul_scalar(reduce_sum(a), 1.0 / double(count));
}

Var reduce_max_axis0(const Var& a) {
  if (a.shape().size() != 2) throw NumericError("reduce_max_axis0: rank-2 input required");
  int64_t rows = a.dim(0), cols = a.dim(1);
  if (rows == 0) throw NumericError("reduce_max_axis0: empty input");
  Tensor out = Tensor::zeros({1, cols}, a.dtype());
  std::vector<int64_t> arg(cols, 0);
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = a.value().template data<T>();
    auto y = out.template mutable_data<T>();
    for (int64_t j = 0; j < cols; ++j) {
      T best = v[j];
      int64_t bi = 0;
      for (int64_t r = 1; r < rows; ++r)
        if (v[r * cols + j] > best) {
          best = v[r * cols + j];
          bi = r;
        }
      y[j] = best;
      arg[j] = bi;
    }
  });
  return make_op("reduce_max_axis0", std::move(out), {a.node()}, [arg = std::move(arg), cols](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
      for (int64_t j = 0; j < cols; ++j) gx[arg[j] * cols + j] += g[j];
    });
  });
}

Var softmax_rows(const Var& a) {
  if (a.shape().size() != 2) throw NumericError("softmax_rows: rank-2 input required");
  int64_t rows = a.dim(0), cols = a.dim(1);
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = a.value().template data<T>();
    auto y = out.template mutable_data<T>();
    for (int64_t r = 0; r < rows; ++r) {
      const T* x = v.data() + r * cols;
      T* p = y.data() + r * cols;
      T mx = x[0];
      for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
      double z = 0;
      for (int64_t j = 0; j < cols; ++j) {
        p[j] = T(std::exp(double(x[j] - mx)));
        z += double(p[j]);
      }
      for (int64_t j = 0; j < cols; ++j) p[j] = T(double(p[j]) / z);
    }
  });
  return make_op("softmax_rows", std::move(out), {a.node()}, [rows, cols](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      auto p = n.value.template data<T>();
      auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
      for (int64_t r = 0; r < rows; ++r) {
        double dot = 0;
        for (int64_t j = 0; j < cols; ++j) dot += double(g[r * cols + j]) * double(p[r * cols + j]);
        for (int64_t j = 0; j < cols; ++j)
          gx[r * cols + j] += T(double(p[r * cols + j]) * (double(g[r * cols + j]) - dot));
      }
    });
  });
}

Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps) {
  if (a.shape().size() != 2) throw NumericError("layer_norm_rows: rank-2 input required");
  int64_t rows = a.dim(0), cols = a.dim(1);
  if (gain.value().numel() != cols || bias.value().numel() != cols)
    throw NumericError("layer_norm_rows: gain/bias must have one entry per column");
  require_same_dtype(a, gain, "layer_norm_rows");
  require_same_dtype(a, bias, "layer_norm_rows");

  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  Tensor norm = Tensor::zeros(a.shape(), a.dtype());
  Tensor inv_sd = Tensor::zeros({rows}, a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = a.value().template data<T>();
    auto gn = gain.value().template data<T>();
    auto bs = bias.value().template data<T>();
    auto y = out.template mutable_data<T>();
    auto nm = norm.template mutable_data<T>();
    auto is = inv_sd.template mutable_data<T>();
    for (int64_t r = 0; r < rows; ++r) {
      const T* x = v.data() + r * cols;
      double mean = 0;
      for (int64_t j = 0; j < cols; ++j) mean += double(x[j]);
      mean /= double(cols);
      double var = 0;
      for (int64_t j = 0; j < cols; ++j) {
        double d = double(x[j]) - mean;
        var += d * d;
      }
      var /= double(cols);
      double inv = 1.0 / std::sqrt(var + eps);
      is[r] = T(inv);
      for (int64_t j = 0; j < cols; ++j) {
        double z = (double(x[j]) - mean) * inv;
        nm[r * cols + j] = T(z);
        y[r * cols + j] = T(z * double(gn[j]) + double(bs[j]));
      }
    }
  });

  return make_op("layer_norm_rows", std::move(out), {a.node(), gain.node(), bias.node()},
                 [rows, cols, norm, inv_sd](Node& n) {
                   dispatch_dtype(n.value.dtype(), [&](auto tag) {
                     using T = decltype(tag);
                     auto g = n.grad.template data<T>();
                     auto nm = norm.template data<T>();
                     auto is = inv_sd.template data<T>();
                     auto gv = n.inputs[1]->value.template data<T>();
                     if (n.inputs[2]->requires_grad) {
                       auto gb = n.inputs[2]->grad_buffer().template mutable_data<T>();
                       for (int64_t r = 0; r < rows; ++r)
                         for (int64_t j = 0; j < cols; ++j) gb[j] += g[r * cols + j];
                     }
                     if (n.inputs[1]->requires_grad) {
                       auto gg = n.inputs[1]->grad_buffer().template mutable_data<T>();
                       for (int64_t r = 0; r < rows; ++r)
                         for (int64_t j = 0; j < cols; ++j)
                           gg[j] += g[r * cols + j] * nm[r * cols + j];
                     }
                     if (n.inputs[0]->requires_grad) {
                       auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
                       for (int64_t r = 0; r < rows; ++r) {
                         double mean_d = 0, mean_dz = 0;
                         for (int64_t j = 0; j < cols; ++j) {
                           double d = double(g[r * cols + j]) * double(gv[j]);
                           mean_d += d;
                           mean_dz += d * double(nm[r * cols + j]);
                         }
                         mean_d /= double(cols);
                         mean_dz /= double(cols);
                         for (int64_t j = 0; j < cols; ++j) {
                           double d = double(g[r * cols + j]) * double(gv[j]);
                           gx[r * cols + j] +=
                               T(double(is[r]) * (d - mean_d - double(nm[r * cols + j]) * mean_dz));
                         }
                       }
                     }
                   });
                 });
}

Var normalize_global(const Var& a, double eps) {
  int64_t count = a.value().numel();
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  double inv_sd_val = 0;
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = a.value().template data<T>();
    auto y = out.template mutable_data<T>();
    double mean = 0;
    for (T x : v) mean += double(x);
    mean /= double(count);
    double var = 0;
    for (T x : v) {
      double d = double(x) - mean;
      var += d * d;
    }
    var /= double(count);
    inv_sd_val = 1.0 / std::sqrt(var + eps);
    for (int64_t i = 0; i < count; ++i) y[i] = T((double(v[i]) - mean) * inv_sd_val);
  });
  Tensor norm = out.clone();
  return make_op("normalize_global", std::move(out), {a.node()},
                 [count, norm, inv_sd_val](Node& n) {
                   dispatch_dtype(n.value.dtype(), [&](auto tag) {
                     using T = decltype(tag);
                     auto g = n.grad.template data<T>();
                     auto nm = norm.template data<T>();
                     auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
                     double mean_g = 0, mean_gz = 0;
                     for (int64_t i = 0; i < count; ++i) {
                       mean_g += double(g[i]);
                       mean_gz += double(g[i]) * double(nm[i]);
                     }
                     mean_g /= double(count);
                     mean_gz /= double(count);
                     for (int64_t i = 0; i < count; ++i)
                       gx[i] += T(inv_sd_val * (double(g[i]) - mean_g - double(nm[i]) * mean_gz));
                   });
                 });
}

Var embedding_rows(const Var& table, const std::vector<int>& ids) {
  if (table.shape().size() != 2) throw NumericError("embedding_rows: rank-2 table required");
  std::vector<int64_t> idx(ids.begin(), ids.end());
  return gather_rows(table, std::move(idx));
}

Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad) {
  require_same_dtype(x, w, "conv2d");
  require_same_dtype(x, bias, "conv2d");
  if (x.shape().size() != 3 || w.shape().size() != 4)
    throw NumericError("conv2d: expected image [H,W,C] and kernel [k,k,C,F]");
  int64_t h = x.dim(0), wd = x.dim(1), c = x.dim(2);
  int64_t k = w.dim(0), f = w.dim(3);
  if (w.dim(1) != k || w.dim(2) != c || bias.value().numel() != f)
    throw NumericError("conv2d: kernel/bias shape mismatch");
  if (stride < 1) throw NumericError("conv2d: stride must be positive");
  int64_t oh = (h + 2 * pad - k) / stride + 1;
  int64_t ow = (wd + 2 * pad - k) / stride + 1;
  if (oh < 1 || ow < 1) throw NumericError("conv2d: kernel larger than padded input");

  int64_t patch = k * k * c;
  Tensor cols = Tensor::zeros({oh * ow, patch}, x.dtype());
  Tensor out = Tensor::zeros({oh * ow, f}, x.dtype());
  dispatch_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto xv = x.value().template data<T>();
    auto cv = cols.template mutable_data<T>();
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox) {
        T* row = cv.data() + (oy * ow + ox) * patch;
        for (int64_t ky = 0; ky < k; ++ky) {
          int64_t iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;  // rows stay zero-filled
          for (int64_t kx = 0; kx < k; ++kx) {
            int64_t ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= wd) continue;
            const T* src = xv.data() + (iy * wd + ix) * c;
            std::copy(src, src + c, row + (ky * k + kx) * c);
          }
        }
      }
    gemm<T>(false, false, oh * ow, f, patch, T(1), cv.data(), w.value().template data<T>().data(),
            T(0), out.template mutable_data<T>().data());
    auto bv = bias.value().template data<T>();
    auto yv = out.template mutable_data<T>();
    for (int64_t r = 0; r < oh * ow; ++r)
      for (int64_t j = 0; j < f; ++j) yv[r * f + j] += bv[j];
  });

  out = out.reshaped({oh, ow, f});
  return make_op("conv2d", std::move(out), {x.node(), w.node(), bias.node()},
                 [=](Node& n) {
                   dispatch_dtype(n.value.dtype(), [&](auto tag) {
                     using T = decltype(tag);
                     const T* g = n.grad.template data<T>().data();  // [oh*ow, f]
                     if (n.inputs[2]->requires_grad) {
                       auto gb = n.inputs[2]->grad_buffer().template mutable_data<T>();
                       for (int64_t r = 0; r < oh * ow; ++r)
                         for (int64_t j = 0; j < f; ++j) gb[j] += g[r * f + j];
                     }
                     if (n.inputs[1]->requires_grad) {
                       T* gw = n.inputs[1]->grad_buffer().template mutable_data<T>().data();
                       gemm<T>(true, false, patch, f, oh * ow, T(1),
                               cols.template data<T>().data(), g, T(1), gw);
                     }
                     if (n.inputs[0]->requires_grad) {
                       Tensor dcols = Tensor::zeros({oh * ow, patch}, n.value.dtype());
                       gemm<T>(false, true, oh * ow, patch, f, T(1), g,
                               n.inputs[1]->value.template data<T>().data(), T(0),
                               dcols.template mutable_data<T>().data());
                       auto dc = dcols.template data<T>();
                       auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
                       for (int64_t oy = 0; oy < oh; ++oy)
                         for (int64_t ox = 0; ox < ow; ++ox) {
                           const T* row = dc.data() + (oy * ow + ox) * patch;
                           for (int64_t ky = 0; ky < k; ++ky) {
                             int64_t iy = oy * stride + ky - pad;
                             if (iy < 0 || iy >= h) continue;
                             for (int64_t kx = 0; kx < k; ++kx) {
                               int64_t ix = ox * stride + kx - pad;
                               if (ix < 0 || ix >= wd) continue;
                               T* dst = gx.data() + (iy * wd + ix) * c;
                               const T* src = row + (ky * k + kx) * c;
                               for (int64_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                             }
                           }
                         }
                     }
                   });
                 });
}

Var dropout(const Var& a, double rate, RngStream& rng, bool train) {
  if (!train || rate == 0.0) return a;
  if (rate < 0.0 || rate >= 1.0) throw NumericError("dropout: rate must be in [0,1)");
  double keep = 1.0 - rate;
  Tensor mask = Tensor::zeros(a.shape(), a.dtype());
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = a.value().template data<T>();
    auto m = mask.template mutable_data<T>();
    auto y = out.template mutable_data<T>();
    for (size_t i = 0; i < v.size(); ++i) {
      // Elements drawn in row-major order so results are placement-stable.
      m[i] = rng.uniform() < rate ? T(0) : T(1.0 / keep);
      y[i] = v[i] * m[i];
    }
  });
  return make_op("dropout", std::move(out), {a.node()}, [mask](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      auto m = mask.template data<T>();
      auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * m[i];
    });
  });
}

Var scale_rows(const Var& a, const Tensor& alpha) {
  if (a.shape().size() != 2) throw NumericError("scale_rows: rank-2 input required");
  int64_t rows = a.dim(0), cols = a.dim(1);
  if (alpha.numel() != rows) throw NumericError("scale_rows: one factor per row required");
  Tensor alpha_t = alpha.dtype() == a.dtype() ? alpha : alpha.astype(a.dtype());
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  dispatch_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = a.value().template data<T>();
    auto al = alpha_t.template data<T>();
    auto y = out.template mutable_data<T>();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t j = 0; j < cols; ++j) y[r * cols + j] = v[r * cols + j] * al[r];
  });
  return make_op("scale_rows", std::move(out), {a.node()}, [alpha_t, rows, cols](Node& n) {
    dispatch_dtype(n.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = n.grad.template data<T>();
      auto al = alpha_t.template data<T>();
      auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < cols; ++j) gx[r * cols + j] += g[r * cols + j] * al[r];
    });
  });
}

Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets,
                       const std::vector<double>& class_weights) {
  if (logits.shape().size() != 2) throw NumericError("cross_entropy_rows: rank-2 logits required");
  int64_t rows = logits.dim(0), classes = logits.dim(1);
  if (int64_t(targets.size()) != rows)
    throw NumericError("cross_entropy_rows: one target per row required");
  if (!class_weights.empty() && int64_t(class_weights.size()) != classes)
    throw NumericError("cross_entropy_rows: one weight per class required");
  for (int t : targets)
    if (t < 0 || t >= classes) throw NumericError("cross_entropy_rows: target out of range");

  Tensor probs = Tensor::zeros(logits.shape(), logits.dtype());
  Tensor out = Tensor::zeros({1}, logits.dtype());
  std::vector<double> row_w(rows, 1.0);
  if (!class_weights.empty())
    for (int64_t r = 0; r < rows; ++r) row_w[r] = class_weights[targets[r]];
  double w_sum = std::accumulate(row_w.begin(), row_w.end(), 0.0);
  if (w_sum <= 0) throw NumericError("cross_entropy_rows: weights sum to zero");

  dispatch_dtype(logits.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = logits.value().template data<T>();
    auto p = probs.template mutable_data<T>();
    double loss = 0;
    for (int64_t r = 0; r < rows; ++r) {
      const T* x = v.data() + r * classes;
      double mx = double(x[0]);
      for (int64_t j = 1; j < classes; ++j) mx = std::max(mx, double(x[j]));
      double z = 0;
      for (int64_t j = 0; j < classes; ++j) {
        double e = std::exp(double(x[j]) - mx);
        p[r * classes + j] = T(e);
        z += e;
      }
      for (int64_t j = 0; j < classes; ++j) p[r * classes + j] = T(double(p[r * classes + j]) / z);
      loss += row_w[r] * (std::log(z) + mx - double(x[targets[r]]));
    }
    out.template mutable_data<T>()[0] = T(loss / w_sum);
  });

  return make_op("cross_entropy_rows", std::move(out), {logits.node()},
                 [probs, targets, row_w, w_sum, rows, classes](Node& n) {
                   dispatch_dtype(n.value.dtype(), [&](auto tag) {
                     using T = decltype(tag);
                     double g = double(n.grad.template data<T>()[0]);
                     auto p = probs.template data<T>();
                     auto gx = n.inputs[0]->grad_buffer().template mutable_data<T>();
                     for (int64_t r = 0; r < rows; ++r) {
                       double scale = g * row_w[r] / w_sum;
                       for (int64_t j = 0; j < classes; ++j) {
                         double d = double(p[r * classes + j]) - (j == targets[r] ? 1.0 : 0.0);
                         gx[r * classes + j] += T(scale * d);
                       }
                     }
                   });
                 });
}

Var add_all(const std::vector<Var>& vs) {
  if (vs.empty()) throw NumericError("add_all: no inputs");
  Var acc = vs[0];
  for (size_t i = 1; i < vs.size(); ++i) acc = add(acc, vs[i]);
  return acc;
}

}  // namespace vut
