#include "nn/gemm.hpp"

#include <Eigen/Core>
#include <thread>

namespace cf2net::nn {

namespace {

// Row-major data is mapped through Eigen's native column-major view and the
// product evaluated as C^T = op(B)^T * op(A)^T. This keeps the long pixel
// dimension as the leading dimension of the result, which Eigen's kernels
// pack efficiently even when the channel dimension is small.
using MatCM = Eigen::MatrixXf;
using MapCM = Eigen::Map<MatCM, 0, Eigen::OuterStride<>>;
using CMapCM = Eigen::Map<const MatCM, 0, Eigen::OuterStride<>>;

}  // namespace

void set_gemm_threads(int threads) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    Eigen::setNbThreads(threads);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
          int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    // Column-major views of the row-major buffers (i.e. the transposes).
    MapCM C(c, n, m, Eigen::OuterStride<>(ldc));
    // A is stored (m x k) row-major when !trans_a -> view is (k x m).
    CMapCM A(a, trans_a ? m : k, trans_a ? k : m, Eigen::OuterStride<>(lda));
    // B is stored (k x n) row-major when !trans_b -> view is (n x k).
    CMapCM B(b, trans_b ? k : n, trans_b ? n : k, Eigen::OuterStride<>(ldb));

    auto run = [&](const auto& lhs, const auto& rhs) {
        if (beta == 0.f) {
            if (alpha == 1.f)
                C.noalias() = lhs * rhs;
            else
                C.noalias() = alpha * (lhs * rhs);
        } else {
            if (beta != 1.f) C *= beta;
            if (alpha == 1.f)
                C.noalias() += lhs * rhs;
            else
                C.noalias() += alpha * (lhs * rhs);
        }
    };

    // C^T (n x m) = op(B)^T (n x k) * op(A)^T (k x m).
    if (!trans_a && !trans_b)
        run(B, A);
    else if (trans_a && !trans_b)
        run(B, A.transpose());
    else if (!trans_a && trans_b)
        run(B.transpose(), A);
    else
        run(B.transpose(), A.transpose());
}

}  // namespace cf2net::nn
