#pragma once

#include <cstddef>

namespace apex::nn {

enum class Trans { No, Yes };

// Row-major single-precision GEMM: C = alpha * op(A) * op(B) + beta * C.
// op(A) is M x K, op(B) is K x N. Leading dimensions are row strides of the
// matrices as stored (before the transpose is applied).
//
// gemm() is the packed, OpenMP-parallel kernel used by the network.
// gemm_reference() is a plain triple loop kept for testing and benchmarks.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc);

void gemm_reference(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                    float alpha, const float* a, std::size_t lda, const float* b,
                    std::size_t ldb, float beta, float* c, std::size_t ldc);

}  // namespace apex::nn
