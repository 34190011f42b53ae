#include "ringlm/tensor.hpp"

#include <cmath>
#include <string>

#include "ringlm/error.hpp"

namespace ringlm {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols) +
                         " vs " + std::to_string(b.rows) + ")");
    }
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const float* arow = a.data.data() + i * a.cols;
        float* orow = out.data.data() + i * b.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const float aik = arow[k];
            const float* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

void matvec_row(std::span<const float> x, const Matrix& w, std::span<float> out) {
    if (x.size() != w.rows) {
        throw ShapeError("matvec_row: vector length " + std::to_string(x.size()) +
                         " does not match matrix rows " + std::to_string(w.rows));
    }
    if (out.size() != w.cols) {
        throw ShapeError("matvec_row: output length " + std::to_string(out.size()) +
                         " does not match matrix cols " + std::to_string(w.cols));
    }
    for (std::size_t j = 0; j < w.cols; ++j) out[j] = 0.0f;
    for (std::size_t k = 0; k < w.rows; ++k) {
        const float xk = x[k];
        const float* wrow = w.data.data() + k * w.cols;
        for (std::size_t j = 0; j < w.cols; ++j) {
            out[j] += xk * wrow[j];
        }
    }
}

void rmsnorm(std::span<const float> x, std::span<const float> weight, float eps,
             std::span<float> out) {
    if (x.size() != weight.size() || x.size() != out.size()) {
        throw ShapeError("rmsnorm: mismatched lengths");
    }
    float sum_sq = 0.0f;
    for (float v : x) sum_sq += v * v;
    const float inv_rms = 1.0f / std::sqrt(sum_sq / static_cast<float>(x.size()) + eps);
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * inv_rms * weight[i];
    }
}

std::vector<float> rmsnorm(std::span<const float> x, std::span<const float> weight, float eps) {
    std::vector<float> out(x.size());
    rmsnorm(x, weight, eps, out);
    return out;
}

void softmax_inplace(std::span<float> x) {
    if (x.empty()) throw ShapeError("softmax: empty input");
    float max_v = x[0];
    for (float v : x) max_v = std::max(max_v, v);
    float sum = 0.0f;
    for (float& v : x) {
        v = std::exp(v - max_v);
        sum += v;
    }
    for (float& v : x) v /= sum;
}

} // namespace ringlm
