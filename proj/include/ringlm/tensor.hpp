#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ringlm {

// Dense row-major 32-bit float matrix. All model math in this project is
// 32-bit; there is intentionally no other element type.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data; // length rows * cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

    float* row(std::size_t i) { return data.data() + i * cols; }
    const float* row(std::size_t i) const { return data.data() + i * cols; }

    std::span<float> row_span(std::size_t i) { return {row(i), cols}; }
    std::span<const float> row_span(std::size_t i) const { return {row(i), cols}; }

    float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

// Standard product, shape (a.rows x b.cols). Throws ShapeError on a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

// y = row_vector(1 x cols) * b, written into out (length b.cols).
void matvec_row(std::span<const float> x, const Matrix& b, std::span<float> out);

// out_i = x_i / sqrt(mean(x^2) + eps) * weight_i
void rmsnorm(std::span<const float> x, std::span<const float> weight, float eps,
             std::span<float> out);
std::vector<float> rmsnorm(std::span<const float> x, std::span<const float> weight, float eps);

// In-place numerically stable softmax (max subtraction).
void softmax_inplace(std::span<float> v);

inline float silu(float x) {
    return x / (1.0f + std::exp(-x));
}

} // namespace ringlm
