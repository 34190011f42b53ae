#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "ringlm/error.hpp"
#include "ringlm/rng.hpp"
#include "ringlm/sampler.hpp"

using namespace ringlm;

TEST_CASE("greedy picks the argmax") {
    SplitMix64 rng(1);
    std::vector<float> logits = {0.1f, 2.5f, -1.0f, 2.4f};
    CHECK(sample_token(logits, DecodeStrategy::greedy(), rng) == 1);
}

TEST_CASE("greedy breaks ties toward the lowest index") {
    SplitMix64 rng(1);
    std::vector<float> logits = {1.0f, 3.0f, 3.0f, 3.0f};
    CHECK(sample_token(logits, DecodeStrategy::greedy(), rng) == 1);
}

TEST_CASE("greedy consumes no randomness") {
    SplitMix64 a(42), b(42);
    std::vector<float> logits = {0.0f, 1.0f};
    (void)sample_token(logits, DecodeStrategy::greedy(), a);
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("temperature sampling advances the generator by one draw") {
    SplitMix64 a(42), b(42);
    std::vector<float> logits = {0.0f, 1.0f, 2.0f};
    (void)sample_token(logits, DecodeStrategy::with_temperature(1.0f), a);
    (void)b.next_double();
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("tiny temperature concentrates on the argmax") {
    SplitMix64 rng(7);
    std::vector<float> logits = {0.0f, 5.0f, 1.0f, -2.0f};
    for (int i = 0; i < 200; ++i)
        CHECK(sample_token(logits, DecodeStrategy::with_temperature(0.01f), rng) == 1);
}

TEST_CASE("top_k = 1 always returns the argmax") {
    SplitMix64 rng(8);
    std::vector<float> logits = {0.3f, -0.2f, 4.0f, 3.9f};
    for (int i = 0; i < 100; ++i)
        CHECK(sample_token(logits, DecodeStrategy::with_temperature(10.0f, 1), rng) == 2);
}

TEST_CASE("top_k restricts sampling to the k highest logits") {
    SplitMix64 rng(9);
    std::vector<float> logits = {5.0f, 4.0f, 3.0f, -100.0f, -100.0f};
    for (int i = 0; i < 500; ++i) {
        const TokenId t = sample_token(logits, DecodeStrategy::with_temperature(5.0f, 3), rng);
        CHECK(t <= 2);
    }
}

TEST_CASE("temperature sampling frequencies follow the softmax distribution") {
    SplitMix64 rng(10);
    // softmax([ln 1, ln 2, ln 5]) = [1/8, 2/8, 5/8] at temperature 1
    std::vector<float> logits = {0.0f, std::log(2.0f), std::log(5.0f)};
    const int n = 40000;
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i)
        counts[sample_token(logits, DecodeStrategy::with_temperature(1.0f), rng)]++;
    const double expect[3] = {n / 8.0, n / 4.0, 5.0 * n / 8.0};
    for (int k = 0; k < 3; ++k) {
        const double p = expect[k] / n;
        const double sigma = std::sqrt(n * p * (1 - p));
        CHECK(std::abs(counts[k] - expect[k]) < 5 * sigma);
    }
}

TEST_CASE("identical seeds give identical draws") {
    std::vector<float> logits = {0.1f, 0.2f, 0.3f, 0.15f};
    SplitMix64 a(123), b(123);
    for (int i = 0; i < 50; ++i) {
        CHECK(sample_token(logits, DecodeStrategy::with_temperature(0.9f, 2), a) ==
              sample_token(logits, DecodeStrategy::with_temperature(0.9f, 2), b));
    }
}

TEST_CASE("sampling errors are typed") {
    SplitMix64 rng(1);
    const float ninf = -std::numeric_limits<float>::infinity();
    std::vector<float> empty;
    std::vector<float> all_ninf = {ninf, ninf};
    std::vector<float> fine = {0.0f, 1.0f};
    CHECK_THROWS_AS((void)sample_token(empty, DecodeStrategy::greedy(), rng), SamplingError);
    CHECK_THROWS_AS((void)sample_token(all_ninf, DecodeStrategy::with_temperature(1.0f), rng),
                    SamplingError);
    CHECK_THROWS_AS((void)sample_token(fine, DecodeStrategy::with_temperature(0.0f), rng),
                    SamplingError);
    CHECK_THROWS_AS((void)sample_token(fine, DecodeStrategy::with_temperature(-1.0f), rng),
                    SamplingError);
}

TEST_CASE("infinite logits below the top are tolerated") {
    SplitMix64 rng(2);
    const float ninf = -std::numeric_limits<float>::infinity();
    std::vector<float> logits = {ninf, 1.0f, ninf};
    for (int i = 0; i < 50; ++i)
        CHECK(sample_token(logits, DecodeStrategy::with_temperature(1.0f), rng) == 1);
}
