#pragma once

#include <cstdint>
#include <span>

#include "ringlm/rng.hpp"
#include "ringlm/tokenizer.hpp"

namespace ringlm {

struct DecodeStrategy {
    enum class Kind { greedy, temperature };

    Kind kind = Kind::greedy;
    float temperature = 1.0f;
    std::uint32_t top_k = 0; // 0 means "whole vocabulary"

    static DecodeStrategy greedy() { return {}; }
    static DecodeStrategy with_temperature(float t, std::uint32_t k = 0) {
        return {Kind::temperature, t, k};
    }
};

// Greedy: argmax with lowest-index tie-break (consumes no randomness).
// Temperature: softmax(logits / t) restricted to the top_k highest logits,
// sampled with the SplitMix64 generator (state advances by one draw).
// Throws SamplingError when no finite logit exists.
TokenId sample_token(std::span<const float> logits, const DecodeStrategy& strategy,
                     SplitMix64& rng);

} // namespace ringlm
