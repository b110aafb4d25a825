#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace overnet {
namespace detail {

// Small accumulating GEMM kernels for the convolution lowering. All three
// compute C += A op B on row-major buffers; callers zero or seed C. Layouts:
//   gemm_nn_acc: C[m x n] += A[m x k] * B[k x n]
//   gemm_tn_acc: C[m x n] += A^T (A is [k x m]) * B[k x n]
//   gemm_nt_acc: C[m x n] += A[m x k] * B^T (B is [n x k])
//
// The nn kernel holds a 4x16 block of C in locals across the whole k loop,
// so the inner loop is pure fused multiply-adds with no C traffic; each
// C element still accumulates its k terms in index order, which keeps
// results independent of the blocking. The transposed variants copy the
// transposed operand once and reuse the nn kernel: the copy is linear in
// the operand size while the multiply is cubic, and it avoids inner-loop
// dot products, which cannot vectorize under strict FP semantics.

template <typename T>
void gemm_nn_acc(std::size_t m, std::size_t n, std::size_t k, const T* A,
                 const T* B, T* C) {
  constexpr std::size_t JT = 16;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = A + (i + 0) * k;
    const T* a1 = A + (i + 1) * k;
    const T* a2 = A + (i + 2) * k;
    const T* a3 = A + (i + 3) * k;
    std::size_t j = 0;
    for (; j + JT <= n; j += JT) {
      T* c0 = C + (i + 0) * n + j;
      T* c1 = C + (i + 1) * n + j;
      T* c2 = C + (i + 2) * n + j;
      T* c3 = C + (i + 3) * n + j;
      T s0[JT], s1[JT], s2[JT], s3[JT];
      for (std::size_t t = 0; t < JT; ++t) {
        s0[t] = c0[t];
        s1[t] = c1[t];
        s2[t] = c2[t];
        s3[t] = c3[t];
      }
      for (std::size_t p = 0; p < k; ++p) {
        const T* b = B + p * n + j;
        const T x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
        for (std::size_t t = 0; t < JT; ++t) {
          const T bt = b[t];
          s0[t] += x0 * bt;
          s1[t] += x1 * bt;
          s2[t] += x2 * bt;
          s3[t] += x3 * bt;
        }
      }
      for (std::size_t t = 0; t < JT; ++t) {
        c0[t] = s0[t];
        c1[t] = s1[t];
        c2[t] = s2[t];
        c3[t] = s3[t];
      }
    }
    for (; j < n; ++j) {
      T s0 = C[(i + 0) * n + j], s1 = C[(i + 1) * n + j];
      T s2 = C[(i + 2) * n + j], s3 = C[(i + 3) * n + j];
      for (std::size_t p = 0; p < k; ++p) {
        const T bj = B[p * n + j];
        s0 += a0[p] * bj;
        s1 += a1[p] * bj;
        s2 += a2[p] * bj;
        s3 += a3[p] * bj;
      }
      C[(i + 0) * n + j] = s0;
      C[(i + 1) * n + j] = s1;
      C[(i + 2) * n + j] = s2;
      C[(i + 3) * n + j] = s3;
    }
  }
  for (; i < m; ++i) {
    const T* a = A + i * k;
    std::size_t j = 0;
    for (; j + JT <= n; j += JT) {
      T* c = C + i * n + j;
      T s[JT];
      for (std::size_t t = 0; t < JT; ++t) s[t] = c[t];
      for (std::size_t p = 0; p < k; ++p) {
        const T* b = B + p * n + j;
        const T x = a[p];
        for (std::size_t t = 0; t < JT; ++t) s[t] += x * b[t];
      }
      for (std::size_t t = 0; t < JT; ++t) c[t] = s[t];
    }
    for (; j < n; ++j) {
      T s = C[i * n + j];
      for (std::size_t p = 0; p < k; ++p) s += a[p] * B[p * n + j];
      C[i * n + j] = s;
    }
  }
}

// Tiled out-of-place transpose: dst[c * rows + r] = src[r * cols + c].
// The 32x32 tiles keep both streams within cache lines; a naive column
// walk costs a cache miss per element on large matrices.
template <typename T>
void transpose_into(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t BT = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += BT) {
    const std::size_t r1 = std::min(rows, r0 + BT);
    for (std::size_t c0 = 0; c0 < cols; c0 += BT) {
      const std::size_t c1 = std::min(cols, c0 + BT);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

template <typename T>
void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const T* A,
                 const T* B, T* C) {
  std::vector<T> at(m * k);
  transpose_into(k, m, A, at.data());
  gemm_nn_acc(m, n, k, at.data(), B, C);
}

template <typename T>
void gemm_nt_acc(std::size_t m, std::size_t n, std::size_t k, const T* A,
                 const T* B, T* C) {
  std::vector<T> bt(k * n);
  transpose_into(n, k, B, bt.data());
  gemm_nn_acc(m, n, k, A, bt.data(), C);
}

}  // namespace detail
}  // namespace overnet
