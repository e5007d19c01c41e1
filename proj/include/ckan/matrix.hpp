#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ckan {

/// Dense row-major matrix of doubles. Plain value type: copy/move do what
/// you expect, and a Matrix handed out by an operation is never mutated by
/// the library afterwards.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // rows*cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row_ptr(std::size_t i) { return data.data() + i * cols; }
    const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }

    std::string shape_str() const;

    /// Throws StateError naming `what` if any entry is NaN/Inf.
    void check_finite(const char* what) const;
};

/// Standard matrix product. Throws ShapeError naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/// Extracts the given rows (in order) into a new matrix.
Matrix take_rows(const Matrix& a, const std::vector<std::size_t>& idx);

} // namespace ckan
