#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "matmuon/errors.hpp"

namespace matmuon {

// Dense row-major real matrix. The universal carrier for iterates W,
// momentum M and gradients.
class Matrix {
public:
    Matrix() = default;

    Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
        if (rows <= 0 || cols <= 0)
            throw InvalidInput("matrix dimensions must be positive");
        data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    }

    Matrix(int rows, int cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (rows <= 0 || cols <= 0)
            throw InvalidInput("matrix dimensions must be positive");
        if (data_.size() != static_cast<std::size_t>(rows) * cols)
            throw InvalidInput("entry count does not match rows*cols");
    }

    static Matrix identity(int n) {
        Matrix out(n, n);
        for (int i = 0; i < n; ++i) out(i, i) = 1.0;
        return out;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const;

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double c, const Matrix& a);

// True iff identical shape and bitwise-identical entries.
bool bitwise_equal(const Matrix& a, const Matrix& b);

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b)) throw ShapeError(what);
}

} // namespace matmuon
