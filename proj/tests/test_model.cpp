#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "reference.hpp"
#include "ringlm/config.hpp"
#include "ringlm/error.hpp"
#include "ringlm/model.hpp"
#include "ringlm/rng.hpp"
#include "ringlm/weights.hpp"

using namespace ringlm;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.vocab_size = 64;
    cfg.n_blocks = 2;
    cfg.d_model = 32;
    cfg.n_heads = 4;
    cfg.n_kv_heads = 2;
    cfg.d_head = 8;
    cfg.context_len = 64;
    cfg.d_ffn = 48;
    cfg.validate();
    return cfg;
}

Matrix random_activation(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Matrix m(rows, cols);
    for (float& v : m.data) v = static_cast<float>(rng.next_gaussian());
    return m;
}

} // namespace

TEST_CASE("rotary encoding matches the complex-multiplication oracle") {
    SplitMix64 rng(10);
    for (int iter = 0; iter < 30; ++iter) {
        const std::size_t d = 2 * (1 + rng.next_u64() % 16);
        const std::size_t pos = rng.next_u64() % 500;
        const float theta = (iter % 2 == 0) ? 10000.0f : 500.0f;
        std::vector<float> v(d);
        for (float& x : v) x = static_cast<float>(rng.next_gaussian());

        std::vector<double> want(v.begin(), v.end());
        refimpl::drope(want, pos, theta);
        apply_rope(v, pos, theta);
        for (std::size_t i = 0; i < d; ++i) CHECK(refimpl::close_rel(v[i], want[i], 1e-4));
    }
}

TEST_CASE("rotary encoding at position zero is the identity") {
    std::vector<float> v = {1.0f, 2.0f, -0.5f, 0.25f};
    const std::vector<float> orig = v;
    apply_rope(v, 0, 10000.0f);
    CHECK(v == orig);
}

TEST_CASE("rotary encoding preserves pair norms") {
    SplitMix64 rng(11);
    std::vector<float> v(16);
    for (float& x : v) x = static_cast<float>(rng.next_gaussian());
    const std::vector<float> orig = v;
    apply_rope(v, 37, 10000.0f);
    for (std::size_t i = 0; i + 1 < v.size(); i += 2) {
        const double before = std::hypot(orig[i], orig[i + 1]);
        const double after = std::hypot(v[i], v[i + 1]);
        CHECK(std::abs(before - after) < 1e-5);
    }
}

TEST_CASE("rotary encoding rejects odd head dimensions") {
    std::vector<float> v(5, 1.0f);
    CHECK_THROWS_AS(apply_rope(v, 1, 10000.0f), ShapeError);
}

TEST_CASE("grouped-query attention with full KV heads matches the MHA oracle") {
    SplitMix64 seeds(12);
    for (int iter = 0; iter < 5; ++iter) {
        ModelConfig cfg = small_config();
        cfg.n_kv_heads = cfg.n_heads; // degenerate: plain multi-head attention
        cfg.n_blocks = 1;
        const WeightStore store = init_random_weights(cfg, seeds.next_u64());
        const std::size_t t = 1 + seeds.next_u64() % 12;
        const Matrix x = random_activation(t, cfg.d_model, seeds.next_u64());

        KVCache cache(cfg.n_kv_heads, cfg.d_head, cfg.context_len);
        const Matrix got = gqa_attention(x, store.blocks[0], cfg, cache, 0);
        const refimpl::DMat want = refimpl::dattention(refimpl::to_dmat(x), store.blocks[0], cfg);
        REQUIRE(got.rows == t);
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = 0; j < cfg.d_model; ++j)
                CHECK(refimpl::close_rel(got.at(i, j), want[i][j], 1e-5));
    }
}

TEST_CASE("grouped KV heads match the oracle's group indexing") {
    SplitMix64 seeds(13);
    for (int iter = 0; iter < 5; ++iter) {
        const ModelConfig cfg = small_config(); // 4 heads over 2 KV heads
        const WeightStore store = init_random_weights(cfg, seeds.next_u64());
        const std::size_t t = 1 + seeds.next_u64() % 10;
        const Matrix x = random_activation(t, cfg.d_model, seeds.next_u64());

        KVCache cache(cfg.n_kv_heads, cfg.d_head, cfg.context_len);
        const Matrix got = gqa_attention(x, store.blocks[0], cfg, cache, 0);
        const refimpl::DMat want = refimpl::dattention(refimpl::to_dmat(x), store.blocks[0], cfg);
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = 0; j < cfg.d_model; ++j)
                CHECK(refimpl::close_rel(got.at(i, j), want[i][j], 1e-5));
    }
}

TEST_CASE("incremental cached forward is bitwise identical to the batched pass") {
    const ModelConfig cfg = small_config();
    const WeightStore store = init_random_weights(cfg, 99);
    const std::size_t t = 9;
    const Matrix x = random_activation(t, cfg.d_model, 7);

    KVCache batched_cache(cfg.n_kv_heads, cfg.d_head, cfg.context_len);
    const Matrix batched = block_forward(x, store.blocks[0], cfg, batched_cache, 0);

    KVCache step_cache(cfg.n_kv_heads, cfg.d_head, cfg.context_len);
    for (std::size_t pos = 0; pos < t; ++pos) {
        Matrix one(1, cfg.d_model);
        std::memcpy(one.row(0), x.row(pos), cfg.d_model * sizeof(float));
        const Matrix out = block_forward(one, store.blocks[0], cfg, step_cache, pos);
        // Bitwise: the row-sequential kernel must not care about batching.
        CHECK(std::memcmp(out.row(0), batched.row(pos), cfg.d_model * sizeof(float)) == 0);
    }
    CHECK(step_cache.len == batched_cache.len);
    CHECK(step_cache.keys == batched_cache.keys);
    CHECK(step_cache.values == batched_cache.values);
}

TEST_CASE("attention rejects a stale cache position") {
    const ModelConfig cfg = small_config();
    const WeightStore store = init_random_weights(cfg, 1);
    KVCache cache(cfg.n_kv_heads, cfg.d_head, cfg.context_len);
    const Matrix x = random_activation(2, cfg.d_model, 2);
    CHECK_THROWS_AS(gqa_attention(x, store.blocks[0], cfg, cache, 1), ShapeError);
}

TEST_CASE("attention rejects cache overflow") {
    ModelConfig cfg = small_config();
    cfg.context_len = 4;
    const WeightStore store = init_random_weights(cfg, 1);
    KVCache cache(cfg.n_kv_heads, cfg.d_head, cfg.context_len);
    const Matrix x = random_activation(5, cfg.d_model, 3);
    CHECK_THROWS_AS(gqa_attention(x, store.blocks[0], cfg, cache, 0), GenerationError);
}

TEST_CASE("block with zero output projections is the identity (residual path)") {
    const ModelConfig cfg = small_config();
    WeightStore store = init_random_weights(cfg, 5);
    BlockWeights& b = store.blocks[0];
    std::fill(b.wo.data.begin(), b.wo.data.end(), 0.0f);
    std::fill(b.w_down.data.begin(), b.w_down.data.end(), 0.0f);

    KVCache cache(cfg.n_kv_heads, cfg.d_head, cfg.context_len);
    const Matrix x = random_activation(4, cfg.d_model, 6);
    const Matrix out = block_forward(x, b, cfg, cache, 0);
    CHECK(out.data == x.data);
}

TEST_CASE("full block matches the double-precision oracle") {
    SplitMix64 seeds(14);
    for (int iter = 0; iter < 5; ++iter) {
        const ModelConfig cfg = small_config();
        const WeightStore store = init_random_weights(cfg, seeds.next_u64());
        const std::size_t t = 1 + seeds.next_u64() % 8;
        const Matrix x = random_activation(t, cfg.d_model, seeds.next_u64());

        KVCache cache(cfg.n_kv_heads, cfg.d_head, cfg.context_len);
        const Matrix got = block_forward(x, store.blocks[0], cfg, cache, 0);
        const refimpl::DMat want = refimpl::dblock(refimpl::to_dmat(x), store.blocks[0], cfg);
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = 0; j < cfg.d_model; ++j)
                CHECK(refimpl::close_rel(got.at(i, j), want[i][j], 1e-4));
    }
}

TEST_CASE("lm_head matches a manual double-precision computation") {
    const ModelConfig cfg = small_config();
    const WeightStore store = init_random_weights(cfg, 21);
    const Matrix x = random_activation(1, cfg.d_model, 22);

    const std::vector<float> got =
        lm_head(x.row_span(0), store.final_norm, store.lm_head, cfg.rmsnorm_eps);
    REQUIRE(got.size() == cfg.vocab_size);

    std::vector<double> xd(x.data.begin(), x.data.end());
    const std::vector<double> n = refimpl::drmsnorm(xd, store.final_norm, cfg.rmsnorm_eps);
    for (std::size_t j = 0; j < cfg.vocab_size; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < cfg.d_model; ++p) acc += n[p] * store.lm_head.at(p, j);
        CHECK(refimpl::close_rel(got[j], acc, 1e-5));
    }
}
