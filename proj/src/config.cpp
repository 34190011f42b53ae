#include "ringlm/config.hpp"

#include <string>

#include "ringlm/error.hpp"

namespace ringlm {

void ModelConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError("model config: " + msg);
    };
    require(vocab_size > 0, "vocab_size must be positive");
    require(n_blocks > 0, "n_blocks must be positive");
    require(d_model > 0, "d_model must be positive");
    require(n_heads > 0, "n_heads must be positive");
    require(n_kv_heads > 0, "n_kv_heads must be positive");
    require(d_head > 0, "d_head must be positive");
    require(context_len > 0, "context_len must be positive");
    require(d_ffn > 0, "d_ffn must be positive");
    require(n_heads * d_head == d_model,
            "n_heads * d_head must equal d_model (" + std::to_string(n_heads) + " * " +
                std::to_string(d_head) + " != " + std::to_string(d_model) + ")");
    require(n_kv_heads <= n_heads, "n_kv_heads must not exceed n_heads");
    require(n_heads % n_kv_heads == 0, "n_heads must be divisible by n_kv_heads");
    require(d_head % 2 == 0, "d_head must be even for rotary embedding");
    require(rope_theta > 0.0f, "rope_theta must be positive");
    require(rmsnorm_eps > 0.0f, "rmsnorm_eps must be positive");
}

std::uint64_t block_parameter_count(const ModelConfig& c) {
    const std::uint64_t d = c.d_model;
    const std::uint64_t kv_dim = static_cast<std::uint64_t>(c.n_kv_heads) * c.d_head;
    std::uint64_t n = 0;
    n += 2 * d;              // attn_norm + ffn_norm
    n += 2 * d * d;          // wq, wo
    n += 2 * d * kv_dim;     // wk, wv
    n += 3 * d * c.d_ffn;    // w_gate, w_up, w_down
    return n;
}

std::uint64_t parameter_count(const ModelConfig& c) {
    const std::uint64_t d = c.d_model;
    std::uint64_t n = static_cast<std::uint64_t>(c.vocab_size) * d; // embedding
    n += static_cast<std::uint64_t>(c.n_blocks) * block_parameter_count(c);
    n += d;                                                  // final norm
    n += d * static_cast<std::uint64_t>(c.vocab_size);       // lm head
    return n;
}

ModelConfig toy_config() {
    ModelConfig c;
    c.vocab_size = 256;
    c.n_blocks = 4;
    c.d_model = 64;
    c.n_heads = 4;
    c.n_kv_heads = 2;
    c.d_head = 16;
    c.context_len = 256;
    c.d_ffn = 256;
    return c;
}

ModelConfig nanollama_config() {
    ModelConfig c;
    c.vocab_size = 32000;
    c.n_blocks = 12;
    c.d_model = 1024;
    c.n_heads = 16;
    c.n_kv_heads = 4;
    c.d_head = 64;
    c.context_len = 2048;
    c.d_ffn = 5632;
    return c;
}

ModelConfig tinyllama_config() {
    ModelConfig c;
    c.vocab_size = 32000;
    c.n_blocks = 22;
    c.d_model = 2048;
    c.n_heads = 32;
    c.n_kv_heads = 4;
    c.d_head = 64;
    c.context_len = 2048;
    c.d_ffn = 5632;
    return c;
}

std::optional<ModelConfig> preset_config(const std::string& name) {
    if (name == "toy") return toy_config();
    if (name == "nanollama") return nanollama_config();
    if (name == "tinyllama") return tinyllama_config();
    return std::nullopt;
}

} // namespace ringlm
