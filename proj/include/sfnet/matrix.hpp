#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "sfnet/errors.hpp"

namespace sfnet {

// Dense row-major matrix of 64-bit floats. Vectors are 1xN matrices.
// Multiplication is delegated to Eigen through zero-copy maps.
class Matrix {
public:
    Matrix() = default;

    Matrix(size_t rows, size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            check(r.size() == cols_, "Matrix: ragged initializer list");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(size_t n) {
        Matrix m(n, n);
        for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(size_t i, size_t j) { return data_[i * cols_ + j]; }
    double operator()(size_t i, size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(size_t i) const { return {data_.data() + i * cols_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<EigenRowMajor> emap(Matrix& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

inline Eigen::Map<const EigenRowMajor> emap(const Matrix& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

}  // namespace detail

inline std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    check(a.cols() == b.rows(),
          "matmul: dimension mismatch " + shape_str(a) + " * " + shape_str(b));
    Matrix out(a.rows(), b.cols());
    detail::emap(out).noalias() = detail::emap(a) * detail::emap(b);
    return out;
}

// out += a * b
inline void add_product(Matrix& out, const Matrix& a, const Matrix& b) {
    check(a.cols() == b.rows() && out.rows() == a.rows() && out.cols() == b.cols(),
          "add_product: dimension mismatch");
    detail::emap(out).noalias() += detail::emap(a) * detail::emap(b);
}

// out += a * b^T
inline void add_product_nt(Matrix& out, const Matrix& a, const Matrix& b) {
    check(a.cols() == b.cols() && out.rows() == a.rows() && out.cols() == b.rows(),
          "add_product_nt: dimension mismatch");
    detail::emap(out).noalias() += detail::emap(a) * detail::emap(b).transpose();
}

// out += a^T * b
inline void add_product_tn(Matrix& out, const Matrix& a, const Matrix& b) {
    check(a.rows() == b.rows() && out.rows() == a.cols() && out.cols() == b.cols(),
          "add_product_tn: dimension mismatch");
    detail::emap(out).noalias() += detail::emap(a).transpose() * detail::emap(b);
}

inline void add_inplace(Matrix& out, const Matrix& a) {
    check(out.same_shape(a), "add_inplace: shape mismatch");
    detail::emap(out) += detail::emap(a);
}

// Elementwise hyperbolic tangent; saturates cleanly for large inputs.
inline Matrix tanh_forward(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    detail::emap(out) = detail::emap(x).array().tanh().matrix();
    return out;
}

}  // namespace sfnet
