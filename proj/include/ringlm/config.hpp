#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace ringlm {

// Architecture hyperparameters of a Llama-family decoder-only model.
struct ModelConfig {
    std::uint32_t vocab_size = 0;
    std::uint32_t n_blocks = 0;
    std::uint32_t d_model = 0;   // embedding dimension == activation length
    std::uint32_t n_heads = 0;
    std::uint32_t n_kv_heads = 0;
    std::uint32_t d_head = 0;    // d_model / n_heads
    std::uint32_t context_len = 0;
    std::uint32_t d_ffn = 0;     // MLP hidden width
    float rope_theta = 10000.0f;
    float rmsnorm_eps = 1e-5f;

    // Throws ConfigError when the invariants do not hold.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

// Total parameter count, closed form from the shapes (no allocation).
std::uint64_t parameter_count(const ModelConfig& config);
// Parameters of one transformer block.
std::uint64_t block_parameter_count(const ModelConfig& config);

// Tiny model for tests and quick runs: 4 blocks, d_model 64, 4 heads,
// 2 KV heads, byte-level vocab.
ModelConfig toy_config();

// 304M-parameter 12-block model (d_model 1024, 16 heads, 4 KV heads).
ModelConfig nanollama_config();

// 1.1B-parameter 22-block model (d_model 2048, 32 heads, 4 KV heads).
ModelConfig tinyllama_config();

// Preset lookup by name: "toy", "nanollama", "tinyllama".
std::optional<ModelConfig> preset_config(const std::string& name);

} // namespace ringlm
