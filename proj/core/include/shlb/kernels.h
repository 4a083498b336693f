#pragma once

#include <cstddef>

namespace shlb::kernels {

// Row-major dense products. `accumulate` adds into c instead of overwriting.
// All three split work on output rows in fixed-size chunks, so results do not
// depend on the thread count.

// c[m x n] (+)= a[m x k] * b[k x n]
template <typename Scalar>
void matmul(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t k,
            std::size_t n, bool accumulate = false);

// c[k x n] (+)= a[m x k]^T * b[m x n]
template <typename Scalar>
void matmul_tn(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate = false);

// c[m x k] (+)= a[m x n] * b[k x n]^T
template <typename Scalar>
void matmul_nt(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate = false);

}  // namespace shlb::kernels
