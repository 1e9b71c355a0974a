#include "smoothie/matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "smoothie/kernels.hpp"

namespace smoothie {

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimension mismatch");
    Mat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k)
            kernels::axpy(a(i, k), b.row(k), c.row(i), b.cols());
    return c;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("matmul_nt: inner dimension mismatch");
    Mat c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j)
            c(i, j) = kernels::dot(a.row(i), b.row(j), a.cols());
    return c;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows())
        throw std::invalid_argument("matmul_tn: inner dimension mismatch");
    Mat c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t i = 0; i < a.cols(); ++i)
            kernels::axpy(a(k, i), b.row(k), c.row(i), b.cols());
    return c;
}

Mat operator+(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("Mat+: shape mismatch");
    Mat c(a.rows(), a.cols());
    kernels::axpby(1.0, a.data(), 1.0, b.data(), c.data(), a.size());
    return c;
}

Mat operator-(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("Mat-: shape mismatch");
    Mat c(a.rows(), a.cols());
    kernels::axpby(1.0, a.data(), -1.0, b.data(), c.data(), a.size());
    return c;
}

Mat operator*(double c, const Mat& a) {
    Mat out(a.rows(), a.cols());
    kernels::axpby(c, a.data(), 0.0, a.data(), out.data(), a.size());
    return out;
}

bool all_finite(const Mat& a) {
    for (double v : a.vec())
        if (!std::isfinite(v)) return false;
    return true;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace smoothie
