#include "smoothie/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#if defined(__x86_64__)
#include <immintrin.h>
#define SMOOTHIE_X86 1
#else
#define SMOOTHIE_X86 0
#endif

namespace smoothie::kernels {

namespace scalar {

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpby(double a, const double* x, double b, const double* y, double* out,
           std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

double sqdist(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = x[i] - y[i];
        acc += diff * diff;
    }
    return acc;
}

void neg_half_sqdist_row(const double* x, const double* emb, std::size_t rows,
                         std::size_t dim, double* out) {
    for (std::size_t j = 0; j < rows; ++j)
        out[j] = -0.5 * sqdist(x, emb + j * dim, dim);
}

void softmax_row(double* x, std::size_t n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - mx);
        sum += x[i];
    }
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < n; ++i) x[i] *= inv;
}

}  // namespace scalar

#if SMOOTHIE_X86

namespace avx2 {

__attribute__((target("avx2,fma"))) static double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

__attribute__((target("avx2,fma"))) double dot(const double* x, const double* y,
                                               std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return hsum(acc) + tail;
}

__attribute__((target("avx2,fma"))) void axpy(double a, const double* x,
                                              double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                    _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

__attribute__((target("avx2,fma"))) void axpby(double a, const double* x,
                                               double b, const double* y,
                                               double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        r = _mm256_fmadd_pd(vb, _mm256_loadu_pd(y + i), r);
        _mm256_storeu_pd(out + i, r);
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

__attribute__((target("avx2,fma"))) double sqdist(const double* x,
                                                  const double* y,
                                                  std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        tail += d * d;
    }
    return hsum(acc) + tail;
}

__attribute__((target("avx2,fma"))) void neg_half_sqdist_row(
    const double* x, const double* emb, std::size_t rows, std::size_t dim,
    double* out) {
    for (std::size_t j = 0; j < rows; ++j)
        out[j] = -0.5 * sqdist(x, emb + j * dim, dim);
}

// exp stays scalar; max/normalize are vectorized
__attribute__((target("avx2,fma"))) void softmax_row(double* x, std::size_t n) {
    __m256d vmax = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(x + i));
    double mx = -std::numeric_limits<double>::infinity();
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vmax);
    for (double v : lanes) mx = std::max(mx, v);
    for (; i < n; ++i) mx = std::max(mx, x[i]);

    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        x[k] = std::exp(x[k] - mx);
        sum += x[k];
    }
    const __m256d vinv = _mm256_set1_pd(1.0 / sum);
    i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vinv));
    for (; i < n; ++i) x[i] *= 1.0 / sum;
}

}  // namespace avx2

static bool have_avx2() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

#endif  // SMOOTHIE_X86

namespace {

struct Dispatch {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*axpby)(double, const double*, double, const double*, double*,
                  std::size_t);
    double (*sqdist)(const double*, const double*, std::size_t);
    void (*neg_half_sqdist_row)(const double*, const double*, std::size_t,
                                std::size_t, double*);
    void (*softmax_row)(double*, std::size_t);
    std::string_view name;
};

Dispatch select_backend() {
#if SMOOTHIE_X86
    if (have_avx2())
        return {avx2::dot,    avx2::axpy,
                avx2::axpby,  avx2::sqdist,
                avx2::neg_half_sqdist_row, avx2::softmax_row,
                "avx2"};
#endif
    return {scalar::dot,    scalar::axpy,
            scalar::axpby,  scalar::sqdist,
            scalar::neg_half_sqdist_row, scalar::softmax_row,
            "scalar"};
}

const Dispatch g_dispatch = select_backend();

}  // namespace

double dot(const double* x, const double* y, std::size_t n) {
    return g_dispatch.dot(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    g_dispatch.axpy(a, x, y, n);
}

void axpby(double a, const double* x, double b, const double* y, double* out,
           std::size_t n) {
    g_dispatch.axpby(a, x, b, y, out, n);
}

double sqdist(const double* x, const double* y, std::size_t n) {
    return g_dispatch.sqdist(x, y, n);
}

void neg_half_sqdist_row(const double* x, const double* emb, std::size_t rows,
                         std::size_t dim, double* out) {
    g_dispatch.neg_half_sqdist_row(x, emb, rows, dim, out);
}

void softmax_row(double* x, std::size_t n) { g_dispatch.softmax_row(x, n); }

std::string_view backend_name() { return g_dispatch.name; }

}  // namespace smoothie::kernels
