#pragma once

// Small row-major matrix kernels used by the dense and convolution layers.
// Loop orders are chosen so the innermost loop walks contiguous memory and
// auto-vectorizes; accumulation order is fixed so results are reproducible.

#include <array>
#include <cstddef>

namespace xaigan::kernels {

/// c[i] += a * x[i]
inline void axpy(std::size_t n, double a, const double* __restrict x, double* __restrict y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

/// Dot product with four interleaved partial sums.
inline double dot(std::size_t n, const double* __restrict a, const double* __restrict b) {
  std::array<double, 4> acc{};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (std::size_t l = 0; l < 4; ++l) acc[l] += a[i + l] * b[i + l];
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// C(m×n) += A(m×k) · B(n×k)ᵀ
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar = a + i * k;
    double* cr = c + i * n;
    for (std::size_t j = 0; j < n; ++j) cr[j] += dot(k, ar, b + j * k);
  }
}

/// C(m×n) += A(m×k) · B(k×n)
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* cr = c + i * n;
    const double* ar = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      if (av != 0.0) axpy(n, av, b + p * n, cr);
    }
  }
}

/// C(m×n) += A(k×m)ᵀ · B(k×n)
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ar = a + p * m;
    const double* br = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ar[i];
      if (av != 0.0) axpy(n, av, br, c + i * n);
    }
  }
}

}  // namespace xaigan::kernels
