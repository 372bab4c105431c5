#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hdqt {

/// Dense row-major matrix of working-precision reals.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& storage() const { return data_; }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Exact full-precision product a·b.
Matrix matmul_ref(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// Rows of `a` selected by `indices`, in order.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> indices);

double max_abs(const Matrix& a);
double frobenius_norm(const Matrix& a);
bool all_finite(const Matrix& a);

/// max|a - b| / max(max|b|, tiny); shapes must match.
double max_rel_diff(const Matrix& a, const Matrix& b);

}  // namespace hdqt
