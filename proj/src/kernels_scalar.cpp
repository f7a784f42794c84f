#include "splatcap/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace splatcap::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(double alpha, const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void fmadd_scalar(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

void exp_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend b{"scalar", dot_scalar,   axpy_scalar, add_scalar, sub_scalar,
                           mul_scalar, scale_scalar, fmadd_scalar, exp_scalar};
    return b;
}

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

const Backend* resolve_initial() {
    if (const char* env = std::getenv("SPLATCAP_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_backend();
        if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2_fma()) return &avx2_backend();
    }
    return cpu_has_avx2_fma() ? &avx2_backend() : &scalar_backend();
}

const Backend*& active_slot() {
    static const Backend* b = resolve_initial();
    return b;
}

}  // namespace

const Backend& active() { return *active_slot(); }

void set_active(const Backend& b) { active_slot() = &b; }

void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C, std::size_t row_begin, std::size_t row_end) {
    (void)M;
    const Backend& k = active();
    for (std::size_t i = row_begin; i < row_end; ++i) {
        const double* arow = A + i * K;
        double* crow = C + i * N;
        for (std::size_t p = 0; p < K; ++p) {
            double a = arow[p];
            if (a != 0.0) k.axpy(a, B + p * N, crow, N);
        }
    }
}

void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C, std::size_t row_begin, std::size_t row_end) {
    (void)M;
    const Backend& k = active();
    for (std::size_t i = row_begin; i < row_end; ++i) {
        const double* arow = A + i * K;
        double* crow = C + i * N;
        for (std::size_t j = 0; j < N; ++j) crow[j] += k.dot(arow, B + j * K, K);
    }
}

void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C, std::size_t row_begin, std::size_t row_end) {
    // C has K rows; thread sharding is over the K dimension
    const Backend& k = active();
    for (std::size_t i = 0; i < M; ++i) {
        const double* arow = A + i * K;
        const double* brow = B + i * N;
        for (std::size_t p = row_begin; p < row_end; ++p) {
            double a = arow[p];
            if (a != 0.0) k.axpy(a, brow, C + p * N, N);
        }
    }
}

}  // namespace splatcap::kernels
