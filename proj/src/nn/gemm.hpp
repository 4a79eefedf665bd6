#pragma once

namespace cf2net::nn {

// Row-major C(m x n) = alpha * op(A) * op(B) + beta * C.
// op(A) is m x k, op(B) is k x n; lda/ldb are the leading dimensions of the
// stored (untransposed) matrices.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
          int lda, const float* b, int ldb, float beta, float* c, int ldc);

// Sets the thread count used by matrix products (0 = hardware default).
void set_gemm_threads(int threads);

}  // namespace cf2net::nn
