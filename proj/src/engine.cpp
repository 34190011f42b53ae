#include "ringlm/engine.hpp"

#include <algorithm>
#include <string>

#include "ringlm/error.hpp"
#include "ringlm/model.hpp"

namespace ringlm {

std::size_t GenerationJob::max_prompt_len() const {
    std::size_t longest = 0;
    for (const auto& p : prompts) longest = std::max(longest, p.size());
    return longest;
}

void GenerationJob::validate(const ModelConfig& config) const {
    if (prompts.empty()) throw ConfigError("job has no prompts");
    if (n_tokens == 0) throw ConfigError("job must request at least one token");
    if (n_tokens > config.context_len) {
        throw ConfigError("job wants " + std::to_string(n_tokens) +
                          " tokens but the context holds " +
                          std::to_string(config.context_len));
    }
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        if (prompts[i].empty()) {
            throw ConfigError("prompt " + std::to_string(i) + " is empty");
        }
        if (prompts[i].size() > n_tokens) {
            throw ConfigError("prompt " + std::to_string(i) + " has " +
                              std::to_string(prompts[i].size()) +
                              " tokens, more than the requested total " +
                              std::to_string(n_tokens));
        }
        for (TokenId t : prompts[i]) {
            if (t >= config.vocab_size) {
                throw ConfigError("prompt " + std::to_string(i) + " holds token " +
                                  std::to_string(t) + ", vocab is " +
                                  std::to_string(config.vocab_size));
            }
        }
    }
}

bool KVCacheSet::sample_initialized(std::size_t sample_id) const {
    check_id(sample_id);
    return init_flags_[sample_id];
}

void KVCacheSet::init_sample(std::size_t sample_id, const ModelConfig& config) {
    check_id(sample_id);
    if (sample_initialized(sample_id)) {
        throw PipelineError("sample " + std::to_string(sample_id) + " already has caches");
    }
    std::vector<KVCache> caches;
    caches.reserve(n_blocks_);
    for (std::size_t b = 0; b < n_blocks_; ++b) {
        caches.emplace_back(config.n_kv_heads, config.d_head, config.context_len);
    }
    slots_[sample_id] = std::move(caches);
    init_flags_[sample_id] = true;
}

void KVCacheSet::rotate(std::size_t sample_id) {
    check_id(sample_id);
    if (!sample_initialized(sample_id)) {
        throw PipelineError("cannot rotate to uninitialized sample " +
                            std::to_string(sample_id));
    }
    active_ = sample_id;
}

std::vector<KVCache>& KVCacheSet::active_caches() {
    if (!active_) throw PipelineError("no active cache slot");
    return slots_[*active_];
}

std::size_t KVCacheSet::sample_len(std::size_t sample_id) const {
    check_id(sample_id);
    if (slots_[sample_id].empty()) return 0;
    return slots_[sample_id].front().len;
}

void KVCacheSet::check_id(std::size_t sample_id) const {
    if (sample_id >= slots_.size()) {
        throw PipelineError("sample id " + std::to_string(sample_id) + " out of range (" +
                            std::to_string(slots_.size()) + " slots)");
    }
}

Matrix embed_tokens(const ChunkWeights& starter, std::span<const TokenId> tokens) {
    if (starter.role != NodeRole::starter) {
        throw PipelineError("only the starter chunk holds the embedding");
    }
    Matrix x(tokens.size(), starter.config.d_model);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] >= starter.config.vocab_size) {
            throw TokenError("token " + std::to_string(tokens[i]) + " out of vocab");
        }
        std::span<const float> src = starter.embedding.row_span(tokens[i]);
        std::copy(src.begin(), src.end(), x.row_span(i).begin());
    }
    return x;
}

Matrix forward_chunk(const ChunkWeights& chunk, const Matrix& x,
                     std::vector<KVCache>& caches, std::size_t start_pos) {
    if (caches.size() != chunk.n_blocks_owned()) {
        throw PipelineError("cache set has " + std::to_string(caches.size()) +
                            " blocks, chunk owns " + std::to_string(chunk.n_blocks_owned()));
    }
    Matrix h = x;
    for (std::size_t b = 0; b < chunk.blocks.size(); ++b) {
        h = block_forward(h, chunk.blocks[b], chunk.config, caches[b], start_pos);
    }
    return h;
}

std::vector<float> output_logits(const ChunkWeights& starter, std::span<const float> row) {
    if (starter.role != NodeRole::starter) {
        throw PipelineError("only the starter chunk holds the LM head");
    }
    return lm_head(row, starter.final_norm, starter.lm_head, starter.config.rmsnorm_eps);
}

std::vector<SplitMix64> make_sample_rngs(std::uint64_t seed, std::size_t n_samples) {
    SplitMix64 master(seed);
    std::vector<SplitMix64> rngs;
    rngs.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        rngs.emplace_back(master.next_u64());
    }
    return rngs;
}

GenerationResult generate_reference(const WeightStore& store, const GenerationJob& job) {
    job.validate(store.config);
    const std::size_t S = job.n_samples();

    PartitionPlan whole;
    whole.n_nodes = 1;
    whole.block_counts = {store.config.n_blocks};
    const ChunkWeights chunk = slice_chunk(store, whole, 0);

    KVCacheSet caches(S, store.config.n_blocks);
    std::vector<SplitMix64> rngs = make_sample_rngs(job.seed, S);

    GenerationResult result;
    result.tokens = job.prompts;
    result.final_logits.resize(S);

    // Same round-robin order as the ring: round 0 is every sample's full
    // prompt pass, later rounds extend one token per sample per round.
    std::size_t max_rounds = 0;
    std::vector<std::size_t> budget(S); // tokens to generate per sample
    for (std::size_t n = 0; n < S; ++n) {
        budget[n] = job.n_tokens - job.prompts[n].size();
        max_rounds = std::max(max_rounds, budget[n]);
    }

    std::vector<std::vector<float>> pending(S); // activation row awaiting sampling
    for (std::size_t round = 0; round <= max_rounds; ++round) {
        for (std::size_t n = 0; n < S; ++n) {
            if (budget[n] == 0 || round > budget[n]) continue;
            if (round == 0) {
                caches.init_sample(n, store.config);
                caches.rotate(n);
                Matrix x = embed_tokens(chunk, result.tokens[n]);
                Matrix y = forward_chunk(chunk, x, caches.active_caches(), 0);
                pending[n].assign(y.row_span(y.rows - 1).begin(),
                                  y.row_span(y.rows - 1).end());
                continue;
            }
            std::vector<float> logits = output_logits(chunk, pending[n]);
            const TokenId next = sample_token(logits, job.decode, rngs[n]);
            result.tokens[n].push_back(next);
            if (round == budget[n]) {
                result.final_logits[n] = std::move(logits);
                continue;
            }
            caches.rotate(n);
            const std::size_t pos = result.tokens[n].size() - 1;
            Matrix x = embed_tokens(chunk, std::span<const TokenId>(&result.tokens[n].back(), 1));
            Matrix y = forward_chunk(chunk, x, caches.active_caches(), pos);
            pending[n].assign(y.row_span(0).begin(), y.row_span(0).end());
        }
    }
    return result;
}

} // namespace ringlm
