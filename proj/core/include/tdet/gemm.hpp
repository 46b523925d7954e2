#pragma once

#include <concepts>
#include <cstddef>

namespace tdet::detail {

// Row-major dense products accumulating into c (c += a * b variants).
// Summation order is fixed, so results are reproducible run to run.

// c[m x n] += a[m x k] * b[k x n]
template <std::floating_point T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);

// c[m x n] += a[m x k] * b[n x k]^T
template <std::floating_point T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);

// c[m x n] += a[k x m]^T * b[k x n]
template <std::floating_point T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);

}  // namespace tdet::detail
