#include "ringlm/model.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "ringlm/error.hpp"

namespace ringlm {

void apply_rope(std::span<float> head_vec, std::size_t position, float theta) {
    if (head_vec.size() % 2 != 0) {
        throw ShapeError("rope: head dimension must be even, got " +
                         std::to_string(head_vec.size()));
    }
    const float d = static_cast<float>(head_vec.size());
    for (std::size_t i = 0; 2 * i < head_vec.size(); ++i) {
        const float freq = std::pow(theta, -static_cast<float>(2 * i) / d);
        const float angle = static_cast<float>(position) * freq;
        const float c = std::cos(angle);
        const float s = std::sin(angle);
        const float x0 = head_vec[2 * i];
        const float x1 = head_vec[2 * i + 1];
        head_vec[2 * i] = x0 * c - x1 * s;
        head_vec[2 * i + 1] = x0 * s + x1 * c;
    }
}

// Rows are processed strictly one at a time, each appending to the cache
// before attending over it. A prompt forwarded as one batch therefore runs
// the exact same float operations as the same tokens fed one per step, which
// keeps cached incremental generation bit-identical to full re-evaluation.
Matrix gqa_attention(const Matrix& x, const BlockWeights& weights, const ModelConfig& config,
                     KVCache& cache, std::size_t start_pos) {
    const std::size_t d_model = config.d_model;
    const std::size_t n_heads = config.n_heads;
    const std::size_t n_kv = config.n_kv_heads;
    const std::size_t d_head = config.d_head;
    const std::size_t kv_dim = n_kv * d_head;
    const std::size_t group = n_heads / n_kv;

    if (x.cols != d_model) {
        throw ShapeError("attention: input dim " + std::to_string(x.cols) +
                         " does not match d_model " + std::to_string(d_model));
    }
    if (start_pos != cache.len) {
        throw ShapeError("attention: start position " + std::to_string(start_pos) +
                         " does not match cache length " + std::to_string(cache.len));
    }
    if (cache.len + x.rows > cache.capacity) {
        throw GenerationError("context overflow: position " +
                              std::to_string(cache.len + x.rows) + " exceeds capacity " +
                              std::to_string(cache.capacity));
    }

    Matrix out(x.rows, d_model);
    std::vector<float> normed(d_model);
    std::vector<float> q(n_heads * d_head);
    std::vector<float> k(kv_dim);
    std::vector<float> v(kv_dim);
    std::vector<float> concat(n_heads * d_head);
    std::vector<float> scores;

    for (std::size_t r = 0; r < x.rows; ++r) {
        const std::size_t pos = cache.len;
        rmsnorm(x.row_span(r), weights.attn_norm, config.rmsnorm_eps, normed);
        matvec_row(normed, weights.wq, q);
        matvec_row(normed, weights.wk, k);
        matvec_row(normed, weights.wv, v);

        for (std::size_t h = 0; h < n_heads; ++h) {
            apply_rope(std::span<float>(q.data() + h * d_head, d_head), pos, config.rope_theta);
        }
        for (std::size_t h = 0; h < n_kv; ++h) {
            apply_rope(std::span<float>(k.data() + h * d_head, d_head), pos, config.rope_theta);
            std::span<float> kdst = cache.key(h, pos);
            std::span<float> vdst = cache.value(h, pos);
            for (std::size_t i = 0; i < d_head; ++i) {
                kdst[i] = k[h * d_head + i];
                vdst[i] = v[h * d_head + i];
            }
        }

        const std::size_t attend_len = pos + 1; // causal: positions 0..pos
        scores.assign(attend_len, 0.0f);
        const float scale = 1.0f / std::sqrt(static_cast<float>(d_head));
        for (std::size_t h = 0; h < n_heads; ++h) {
            const std::size_t kv_head = h / group;
            const float* qh = q.data() + h * d_head;
            for (std::size_t j = 0; j < attend_len; ++j) {
                std::span<const float> kj =
                    static_cast<const KVCache&>(cache).key(kv_head, j);
                float dot = 0.0f;
                for (std::size_t i = 0; i < d_head; ++i) dot += qh[i] * kj[i];
                scores[j] = dot * scale;
            }
            softmax_inplace(scores);
            float* dst = concat.data() + h * d_head;
            for (std::size_t i = 0; i < d_head; ++i) dst[i] = 0.0f;
            for (std::size_t j = 0; j < attend_len; ++j) {
                std::span<const float> vj =
                    static_cast<const KVCache&>(cache).value(kv_head, j);
                const float w = scores[j];
                for (std::size_t i = 0; i < d_head; ++i) dst[i] += w * vj[i];
            }
        }

        matvec_row(concat, weights.wo, out.row_span(r));
        cache.len += 1;
    }
    return out;
}

Matrix block_forward(const Matrix& x, const BlockWeights& weights, const ModelConfig& config,
                     KVCache& cache, std::size_t start_pos) {
    Matrix attn = gqa_attention(x, weights, config, cache, start_pos);
    Matrix out(x.rows, x.cols);

    std::vector<float> normed(config.d_model);
    std::vector<float> gate(config.d_ffn);
    std::vector<float> up(config.d_ffn);
    std::vector<float> mlp(config.d_model);

    for (std::size_t r = 0; r < x.rows; ++r) {
        std::span<float> h = attn.row_span(r);
        std::span<const float> xin = x.row_span(r);
        for (std::size_t i = 0; i < config.d_model; ++i) h[i] += xin[i];

        rmsnorm(h, weights.ffn_norm, config.rmsnorm_eps, normed);
        matvec_row(normed, weights.w_gate, gate);
        matvec_row(normed, weights.w_up, up);
        for (std::size_t i = 0; i < config.d_ffn; ++i) gate[i] = silu(gate[i]) * up[i];
        matvec_row(gate, weights.w_down, mlp);

        std::span<float> orow = out.row_span(r);
        for (std::size_t i = 0; i < config.d_model; ++i) orow[i] = h[i] + mlp[i];
    }
    return out;
}

std::vector<float> lm_head(std::span<const float> x, std::span<const float> final_norm,
                           const Matrix& w_out, float eps) {
    std::vector<float> normed = rmsnorm(x, final_norm, eps);
    std::vector<float> logits(w_out.cols);
    matvec_row(normed, w_out, logits);
    return logits;
}

} // namespace ringlm
