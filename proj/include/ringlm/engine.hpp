#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ringlm/partition.hpp"
#include "ringlm/sampler.hpp"
#include "ringlm/tokenizer.hpp"

namespace ringlm {

// One generation request: S prompts, each grown to n_tokens total tokens
// (prompt included).
struct GenerationJob {
    std::vector<std::vector<TokenId>> prompts;
    std::size_t n_tokens = 0;
    DecodeStrategy decode;
    std::uint64_t seed = 0;

    std::size_t n_samples() const { return prompts.size(); }
    std::size_t max_prompt_len() const;

    // Throws ConfigError when the job is inconsistent with the config.
    void validate(const ModelConfig& config) const;
};

// Per-sample rotating KV caches over one node's owned blocks. Slots start
// empty ("None") and are allocated on the first pass for each sample;
// exactly one slot is active during a forward pass.
class KVCacheSet {
public:
    KVCacheSet() = default;
    KVCacheSet(std::size_t n_samples, std::size_t n_blocks_owned)
        : n_blocks_(n_blocks_owned), slots_(n_samples), init_flags_(n_samples, false) {}

    std::size_t n_samples() const { return slots_.size(); }
    bool sample_initialized(std::size_t sample_id) const;

    // Allocates empty caches (full context capacity) for a sample's slot.
    void init_sample(std::size_t sample_id, const ModelConfig& config);

    // Makes sample_id the active slot; other slots are untouched.
    void rotate(std::size_t sample_id);

    std::optional<std::size_t> active() const { return active_; }
    std::vector<KVCache>& active_caches();

    // Cached token count of a sample (0 for an uninitialized slot).
    std::size_t sample_len(std::size_t sample_id) const;

private:
    void check_id(std::size_t sample_id) const;

    std::size_t n_blocks_ = 0;
    std::vector<std::vector<KVCache>> slots_;
    std::vector<bool> init_flags_; // tracks init for nodes that own no blocks
    std::optional<std::size_t> active_;
};

// Embedding rows of the starter chunk for a token sequence.
Matrix embed_tokens(const ChunkWeights& starter, std::span<const TokenId> tokens);

// Runs x through every block the chunk owns, appending to the per-block
// caches from start_pos.
Matrix forward_chunk(const ChunkWeights& chunk, const Matrix& x,
                     std::vector<KVCache>& caches, std::size_t start_pos);

// Final norm + LM head of the starter chunk applied to one activation row.
std::vector<float> output_logits(const ChunkWeights& starter, std::span<const float> row);

// Per-sample sampling generators, derived from the job seed so the draw
// sequence of one sample does not depend on how samples interleave.
std::vector<SplitMix64> make_sample_rngs(std::uint64_t seed, std::size_t n_samples);

struct GenerationResult {
    // Full token sequences (prompt + generated), one per sample.
    std::vector<std::vector<TokenId>> tokens;
    // Logits of the last sampling step, one per sample (for verification).
    std::vector<std::vector<float>> final_logits;
    // Set when generation aborted; tokens hold whatever was produced.
    std::optional<std::string> error;
};

// Single-process reference: the whole model in one loop, no queues, no ring.
// This is the ground truth the distributed runs are compared against.
GenerationResult generate_reference(const WeightStore& store, const GenerationJob& job);

} // namespace ringlm
