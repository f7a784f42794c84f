#pragma once

#include <cstddef>

// Data-parallel inner loops used by the tensor engine and the rasterizer.
// Two implementations exist: a scalar reference (always available, the
// semantic ground truth) and an AVX2+FMA variant. The active backend is
// resolved once at startup from CPUID, overridable with
// SPLATCAP_KERNELS=scalar|avx2.

namespace splatcap::kernels {

struct Backend {
    const char* name;
    // out/result buffers may not alias inputs unless noted
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);  // y += alpha*x
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(double alpha, const double* x, double* out, std::size_t n);
    void (*fmadd)(const double* a, const double* b, double* y, std::size_t n);  // y += a*b
    void (*exp_v)(const double* x, double* out, std::size_t n);
};

const Backend& scalar_backend();
const Backend& avx2_backend();

bool cpu_has_avx2_fma();

// Active backend, chosen once. set_active() exists for equivalence tests.
const Backend& active();
void set_active(const Backend& b);

// Row-major GEMM helpers built on the active backend. All accumulate (+=).
// Row ranges allow callers to shard work across threads deterministically.
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C, std::size_t row_begin, std::size_t row_end);  // C[M,N] += A[M,K] B[K,N]
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C, std::size_t row_begin, std::size_t row_end);  // C[M,N] += A[M,K] B^T, B[N,K]
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C, std::size_t row_begin, std::size_t row_end);  // C[K,N] += A^T B, A[M,K]; rows of C = K

}  // namespace splatcap::kernels
