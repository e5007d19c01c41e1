#include "ckan/matrix.hpp"

#include "ckan/errors.hpp"

#include <cmath>

namespace ckan {

std::string Matrix::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

void Matrix::check_finite(const char* what) const {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw StateError(std::string(what) + " contains a non-finite value");
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " * " + b.shape_str());
    }
    Matrix out(a.rows, b.cols);
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* out_row = out.row_ptr(i);
        const double* a_row = a.row_ptr(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a_row[k];
            const double* b_row = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols; ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

Matrix take_rows(const Matrix& a, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), a.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows) {
            throw IndexError("take_rows: row index " + std::to_string(idx[i]) +
                             " out of range for " + a.shape_str());
        }
        const double* src = a.row_ptr(idx[i]);
        std::copy(src, src + a.cols, out.row_ptr(i));
    }
    return out;
}

} // namespace ckan
