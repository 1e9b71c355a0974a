#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops used by the latent, diffusion and denoiser
// modules. Every kernel has a scalar reference implementation and, on
// x86-64, an AVX2+FMA variant. The active variant is chosen once at load
// time from CPUID; kernels::backend_name() reports which one is live.
// Scalar and SIMD variants are equivalence-tested against each other.

namespace smoothie::kernels {

// y . x over n elements
double dot(const double* x, const double* y, std::size_t n);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

// out[i] = a * x[i] + b * y[i]
void axpby(double a, const double* x, double b, const double* y, double* out,
           std::size_t n);

// sum of squared differences: sum_i (x[i] - y[i])^2
double sqdist(const double* x, const double* y, std::size_t n);

// out[j] = -0.5 * ||x - emb_row_j||^2 for j in [0, rows);
// emb is row-major rows x dim
void neg_half_sqdist_row(const double* x, const double* emb, std::size_t rows,
                         std::size_t dim, double* out);

// in-place numerically stable softmax over one row
void softmax_row(double* x, std::size_t n);

std::string_view backend_name();

// Test hooks: the reference implementations, always scalar.
namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void axpby(double a, const double* x, double b, const double* y, double* out,
           std::size_t n);
double sqdist(const double* x, const double* y, std::size_t n);
void neg_half_sqdist_row(const double* x, const double* emb, std::size_t rows,
                         std::size_t dim, double* out);
void softmax_row(double* x, std::size_t n);
}  // namespace scalar

}  // namespace smoothie::kernels
