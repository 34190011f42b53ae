#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ringlm/config.hpp"
#include "ringlm/tensor.hpp"

namespace ringlm {

// Weights of one transformer block.
struct BlockWeights {
    std::vector<float> attn_norm; // d_model
    Matrix wq;                    // d_model x (n_heads * d_head)
    Matrix wk;                    // d_model x (n_kv_heads * d_head)
    Matrix wv;                    // d_model x (n_kv_heads * d_head)
    Matrix wo;                    // (n_heads * d_head) x d_model
    std::vector<float> ffn_norm;  // d_model
    Matrix w_gate;                // d_model x d_ffn
    Matrix w_up;                  // d_model x d_ffn
    Matrix w_down;                // d_ffn x d_model
};

// Key/value cache of one transformer block for one sample. Capacity is fixed
// at init; len grows as tokens are appended and never exceeds capacity.
struct KVCache {
    std::size_t n_kv_heads = 0;
    std::size_t d_head = 0;
    std::size_t capacity = 0;
    std::size_t len = 0;
    std::vector<float> keys;   // [head][position][d_head]
    std::vector<float> values; // [head][position][d_head]

    KVCache() = default;
    KVCache(std::size_t kv_heads, std::size_t head_dim, std::size_t cap)
        : n_kv_heads(kv_heads), d_head(head_dim), capacity(cap),
          keys(kv_heads * cap * head_dim, 0.0f), values(kv_heads * cap * head_dim, 0.0f) {}

    bool initialized() const { return capacity > 0; }

    std::span<float> key(std::size_t head, std::size_t pos) {
        return {keys.data() + (head * capacity + pos) * d_head, d_head};
    }
    std::span<const float> key(std::size_t head, std::size_t pos) const {
        return {keys.data() + (head * capacity + pos) * d_head, d_head};
    }
    std::span<float> value(std::size_t head, std::size_t pos) {
        return {values.data() + (head * capacity + pos) * d_head, d_head};
    }
    std::span<const float> value(std::size_t head, std::size_t pos) const {
        return {values.data() + (head * capacity + pos) * d_head, d_head};
    }
};

// Rotate consecutive pairs (x[2i], x[2i+1]) of one head vector by
// position * theta^(-2i / d_head), in place. Throws ShapeError on an odd
// head dimension.
void apply_rope(std::span<float> head_vec, std::size_t position, float theta);

// Grouped-query attention with cache append. x is (t_new x d_model) and
// start_pos must equal cache.len; new K/V rows are rotated and appended,
// each query head attends causally over the cached positions of its KV
// group, and the concatenated heads are passed through the output
// projection. Normalization by weights.attn_norm happens inside. Throws
// GenerationError when start_pos + t_new exceeds the cache capacity.
Matrix gqa_attention(const Matrix& x, const BlockWeights& weights, const ModelConfig& config,
                     KVCache& cache, std::size_t start_pos);

// Full transformer block: x + attn(norm(x)), then + silu-gated MLP of the
// post-attention norm. Shape preserved.
Matrix block_forward(const Matrix& x, const BlockWeights& weights, const ModelConfig& config,
                     KVCache& cache, std::size_t start_pos);

// logits = rmsnorm(x, final_norm) * w_out, length vocab_size.
std::vector<float> lm_head(std::span<const float> x, std::span<const float> final_norm,
                           const Matrix& w_out, float eps);

} // namespace ringlm
