#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace smoothie {

// Dense row-major matrix of doubles. Small and value-semantic; all heavy
// loops go through the kernels layer.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat from(std::size_t rows, std::size_t cols,
                    std::vector<double> values) {
        if (values.size() != rows * cols)
            throw std::invalid_argument("Mat::from: size mismatch");
        Mat m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.data_ = std::move(values);
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) {
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        return data_[r * cols_ + c];
    }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    bool same_shape(const Mat& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// C = A * B
Mat matmul(const Mat& a, const Mat& b);
// C = A * B^T
Mat matmul_nt(const Mat& a, const Mat& b);
// C = A^T * B
Mat matmul_tn(const Mat& a, const Mat& b);

Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator*(double c, const Mat& a);

bool all_finite(const Mat& a);
double max_abs_diff(const Mat& a, const Mat& b);

}  // namespace smoothie
