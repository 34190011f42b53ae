#include <doctest.h>

#include <cmath>
#include <vector>

#include "reference.hpp"
#include "ringlm/error.hpp"
#include "ringlm/rng.hpp"
#include "ringlm/tensor.hpp"

using namespace ringlm;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, SplitMix64& rng, float scale = 1.0f) {
    Matrix m(r, c);
    for (float& v : m.data) v = static_cast<float>(rng.next_gaussian()) * scale;
    return m;
}

} // namespace

TEST_CASE("matmul matches a double-precision triple loop") {
    SplitMix64 rng(1);
    for (int iter = 0; iter < 20; ++iter) {
        const std::size_t n = 1 + rng.next_u64() % 17;
        const std::size_t k = 1 + rng.next_u64() % 17;
        const std::size_t m = 1 + rng.next_u64() % 17;
        const Matrix a = random_matrix(n, k, rng);
        const Matrix b = random_matrix(k, m, rng);
        const Matrix got = matmul(a, b);
        const refimpl::DMat want = refimpl::dmatmul(refimpl::to_dmat(a), refimpl::to_dmat(b));
        REQUIRE(got.rows == n);
        REQUIRE(got.cols == m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                CHECK(refimpl::close_rel(got.at(i, j), want[i][j], 1e-4));
    }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    Matrix a(2, 3), b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matvec_row equals the corresponding matmul row") {
    SplitMix64 rng(2);
    const Matrix a = random_matrix(3, 8, rng);
    const Matrix b = random_matrix(8, 5, rng);
    const Matrix full = matmul(a, b);
    for (std::size_t i = 0; i < a.rows; ++i) {
        std::vector<float> out(b.cols);
        matvec_row(a.row_span(i), b, out);
        for (std::size_t j = 0; j < b.cols; ++j) CHECK(out[j] == full.at(i, j));
    }
}

TEST_CASE("rmsnorm matches a scalar double-precision oracle") {
    SplitMix64 rng(3);
    for (int iter = 0; iter < 10; ++iter) {
        const std::size_t n = 1 + rng.next_u64() % 64;
        std::vector<float> x(n), w(n);
        for (float& v : x) v = static_cast<float>(rng.next_gaussian());
        for (float& v : w) v = static_cast<float>(rng.next_gaussian());
        const float eps = 1e-5f;
        const std::vector<float> got = rmsnorm(x, w, eps);

        std::vector<double> xd(x.begin(), x.end());
        const std::vector<double> want = refimpl::drmsnorm(xd, w, eps);
        REQUIRE(got.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(refimpl::close_rel(got[i], want[i], 1e-5));
    }
}

TEST_CASE("rmsnorm with unit weights produces unit RMS") {
    SplitMix64 rng(4);
    std::vector<float> x(32), w(32, 1.0f);
    for (float& v : x) v = static_cast<float>(rng.next_gaussian()) * 3.0f;
    const std::vector<float> out = rmsnorm(x, w, 0.0f);
    double ms = 0.0;
    for (float v : out) ms += static_cast<double>(v) * v;
    ms /= static_cast<double>(out.size());
    CHECK(std::abs(std::sqrt(ms) - 1.0) < 1e-5);
}

TEST_CASE("softmax sums to one and preserves order") {
    std::vector<float> v = {0.5f, -1.0f, 3.0f, 0.5f};
    softmax_inplace(v);
    double sum = 0.0;
    for (float x : v) sum += x;
    CHECK(std::abs(sum - 1.0) < 1e-6);
    CHECK(v[2] > v[0]);
    CHECK(v[0] > v[1]);
    CHECK(v[0] == v[3]); // equal logits stay equal
}

TEST_CASE("softmax is stable for huge logits") {
    std::vector<float> v = {1e30f, 1e30f, -1e30f};
    softmax_inplace(v);
    CHECK(std::isfinite(v[0]));
    CHECK(std::abs(v[0] - 0.5f) < 1e-6f);
    CHECK(v[2] == 0.0f);
}

TEST_CASE("silu fundamentals") {
    CHECK(silu(0.0f) == 0.0f);
    CHECK(std::abs(silu(20.0f) - 20.0f) < 1e-4f);
    CHECK(std::abs(silu(-20.0f)) < 1e-4f);
    // x * sigmoid(x) at x = 1
    CHECK(std::abs(silu(1.0f) - 1.0f / (1.0f + std::exp(-1.0f))) < 1e-6f);
}
