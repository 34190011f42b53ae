#pragma once

// Independent reference implementations used only by the tests. Everything
// here is double precision and deliberately structured differently from the
// library (batch full-sequence math, no KV cache, complex-number rotation)
// so that agreement between the two is meaningful.

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "ringlm/config.hpp"
#include "ringlm/model.hpp"
#include "ringlm/tensor.hpp"
#include "ringlm/tokenizer.hpp"
#include "ringlm/weights.hpp"

namespace refimpl {

using DMat = std::vector<std::vector<double>>;

inline DMat to_dmat(const ringlm::Matrix& m) {
    DMat out(m.rows, std::vector<double>(m.cols));
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out[i][j] = m.at(i, j);
    return out;
}

// Plain triple-loop product, double accumulation.
inline DMat dmatmul(const DMat& a, const DMat& b) {
    const std::size_t n = a.size();
    const std::size_t k = b.size();
    const std::size_t m = b.empty() ? 0 : b[0].size();
    DMat out(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i][p] * b[p][j];
            out[i][j] = acc;
        }
    return out;
}

inline std::vector<double> drmsnorm(std::span<const double> x, std::span<const float> w,
                                    double eps) {
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(ms + eps);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * w[i];
    return out;
}

// Rotary position encoding as complex multiplication: adjacent pair
// (x[2i], x[2i+1]) is a complex number multiplied by exp(i * pos * freq_i),
// freq_i = theta^(-2i / d).
inline void drope(std::span<double> head_vec, std::size_t position, double theta) {
    const std::size_t d = head_vec.size();
    for (std::size_t i = 0; 2 * i + 1 < d; ++i) {
        const double freq = std::pow(theta, -2.0 * static_cast<double>(i) / static_cast<double>(d));
        const std::complex<double> rot =
            std::exp(std::complex<double>(0.0, static_cast<double>(position) * freq));
        const std::complex<double> v(head_vec[2 * i], head_vec[2 * i + 1]);
        const std::complex<double> r = v * rot;
        head_vec[2 * i] = r.real();
        head_vec[2 * i + 1] = r.imag();
    }
}

inline std::vector<double> dsoftmax(std::span<const double> v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

// Full-sequence causal attention over all positions at once, no cache.
// Handles grouped KV (query head h reads KV head h / (n_heads / n_kv_heads));
// with n_kv_heads == n_heads this is exactly multi-head attention. Matches
// the semantics of ringlm::gqa_attention: attn_norm applied inside, output
// projection applied, no residual.
inline DMat dattention(const DMat& x, const ringlm::BlockWeights& w,
                       const ringlm::ModelConfig& cfg) {
    const std::size_t t = x.size();
    const std::size_t group = cfg.n_heads / cfg.n_kv_heads;

    DMat normed(t);
    for (std::size_t i = 0; i < t; ++i)
        normed[i] = drmsnorm(x[i], w.attn_norm, cfg.rmsnorm_eps);

    const DMat q = dmatmul(normed, to_dmat(w.wq)); // t x n_heads*d_head
    DMat k = dmatmul(normed, to_dmat(w.wk));       // t x n_kv*d_head
    DMat v = dmatmul(normed, to_dmat(w.wv));
    DMat qr = q;
    for (std::size_t pos = 0; pos < t; ++pos) {
        for (std::size_t h = 0; h < cfg.n_heads; ++h)
            drope(std::span<double>(qr[pos]).subspan(h * cfg.d_head, cfg.d_head), pos,
                  cfg.rope_theta);
        for (std::size_t h = 0; h < cfg.n_kv_heads; ++h)
            drope(std::span<double>(k[pos]).subspan(h * cfg.d_head, cfg.d_head), pos,
                  cfg.rope_theta);
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_head));
    DMat attended(t, std::vector<double>(cfg.n_heads * cfg.d_head, 0.0));
    for (std::size_t pos = 0; pos < t; ++pos) {
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            const std::size_t kvh = h / group;
            std::vector<double> scores(pos + 1);
            for (std::size_t p = 0; p <= pos; ++p) {
                double acc = 0.0;
                for (std::size_t d = 0; d < cfg.d_head; ++d)
                    acc += qr[pos][h * cfg.d_head + d] * k[p][kvh * cfg.d_head + d];
                scores[p] = acc * scale;
            }
            const std::vector<double> probs = dsoftmax(scores);
            for (std::size_t p = 0; p <= pos; ++p)
                for (std::size_t d = 0; d < cfg.d_head; ++d)
                    attended[pos][h * cfg.d_head + d] += probs[p] * v[p][kvh * cfg.d_head + d];
        }
    }
    return dmatmul(attended, to_dmat(w.wo)); // t x d_model
}

// One full block (attention + gated MLP with residuals), full sequence.
inline DMat dblock(const DMat& x, const ringlm::BlockWeights& w, const ringlm::ModelConfig& cfg) {
    const DMat attn = dattention(x, w, cfg);
    DMat h(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        h[i].resize(cfg.d_model);
        for (std::size_t j = 0; j < cfg.d_model; ++j) h[i][j] = x[i][j] + attn[i][j];
    }

    const DMat wg = to_dmat(w.w_gate);
    const DMat wu = to_dmat(w.w_up);
    const DMat wd = to_dmat(w.w_down);
    DMat out = h;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const std::vector<double> n = drmsnorm(h[i], w.ffn_norm, cfg.rmsnorm_eps);
        std::vector<double> gated(cfg.d_ffn);
        for (std::size_t j = 0; j < cfg.d_ffn; ++j) {
            double g = 0.0, u = 0.0;
            for (std::size_t p = 0; p < cfg.d_model; ++p) {
                g += n[p] * wg[p][j];
                u += n[p] * wu[p][j];
            }
            gated[j] = (g / (1.0 + std::exp(-g))) * u;
        }
        for (std::size_t j = 0; j < cfg.d_model; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < cfg.d_ffn; ++p) acc += gated[p] * wd[p][j];
            out[i][j] += acc;
        }
    }
    return out;
}

// Whole-model forward over a token sequence, no cache, everything double.
// Returns the logits at the final position.
inline std::vector<double> dforward_logits(const ringlm::WeightStore& store,
                                           std::span<const ringlm::TokenId> tokens) {
    const ringlm::ModelConfig& cfg = store.config;
    DMat x(tokens.size(), std::vector<double>(cfg.d_model));
    for (std::size_t i = 0; i < tokens.size(); ++i)
        for (std::size_t j = 0; j < cfg.d_model; ++j)
            x[i][j] = store.embedding.at(tokens[i], j);

    for (const ringlm::BlockWeights& b : store.blocks) x = dblock(x, b, cfg);

    const std::vector<double> n =
        drmsnorm(x.back(), store.final_norm, cfg.rmsnorm_eps);
    std::vector<double> logits(cfg.vocab_size, 0.0);
    for (std::size_t j = 0; j < cfg.vocab_size; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < cfg.d_model; ++p) acc += n[p] * store.lm_head.at(p, j);
        logits[j] = acc;
    }
    return logits;
}

// |a - b| <= tol * max(1, |b|), elementwise helper.
inline bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

} // namespace refimpl
