#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>

namespace vut {

// C = alpha * op(A) * op(B) + beta * C with row-major buffers.
// op(A) is [m,k], op(B) is [k,n]; beta is 0 or 1 in practice.
template <class T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
          const T* a, const T* b, T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<Mat> cm(c, m, n);
  auto run = [&](const auto& am, const auto& bm) {
    if (beta == T(0)) {
      cm.noalias() = alpha * (am * bm);
    } else {
      if (beta != T(1)) cm *= beta;
      cm.noalias() += alpha * (am * bm);
    }
  };
  Eigen::Map<const Mat> a_nt(a, m, k), a_t(a, k, m);
  Eigen::Map<const Mat> b_nt(b, k, n), b_t(b, n, k);
  if (!trans_a && !trans_b) {
    run(a_nt, b_nt);
  } else if (trans_a && !trans_b) {
    run(a_t.transpose(), b_nt);
  } else if (!trans_a && trans_b) {
    run(a_nt, b_t.transpose());
  } else {
    run(a_t.transpose(), b_t.transpose());
  }
}

// Same contract with a fixed i/k/j accumulation order: entry (i,j) always sums
// its k terms in ascending order, so growing any dimension with zero rows or
// columns leaves previously existing entries bit-identical. Used where outputs
// must not move as a sequence extends; slower than the blocked kernel above.
template <class T>
void ordered_gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
                  const T* a, const T* b, T beta, T* c) {
  if (beta == T(0)) {
    std::fill(c, c + m * n, T(0));
  } else if (beta != T(1)) {
    for (int64_t i = 0; i < m * n; ++i) c[i] *= beta;
  }
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (int64_t kk = 0; kk < k; ++kk) {
      T aik = alpha * (trans_a ? a[kk * m + i] : a[i * k + kk]);
      if (!trans_b) {
        const T* brow = b + kk * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
      } else {
        for (int64_t j = 0; j < n; ++j) crow[j] += aik * b[j * k + kk];
      }
    }
  }
}

}  // namespace vut
