#include "ringlm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ringlm/error.hpp"

namespace ringlm {

namespace {

TokenId sample_greedy(std::span<const float> logits) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = i; // strict: ties keep the lowest index
    }
    return static_cast<TokenId>(best);
}

TokenId sample_temperature(std::span<const float> logits, float temperature, std::uint32_t top_k,
                           SplitMix64& rng) {
    std::vector<std::size_t> candidates(logits.size());
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    if (top_k > 0 && top_k < logits.size()) {
        std::partial_sort(candidates.begin(), candidates.begin() + top_k, candidates.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (logits[a] != logits[b]) return logits[a] > logits[b];
                              return a < b;
                          });
        candidates.resize(top_k);
    }

    float max_v = -std::numeric_limits<float>::infinity();
    for (std::size_t idx : candidates) max_v = std::max(max_v, logits[idx]);
    if (!std::isfinite(max_v)) {
        throw SamplingError("temperature sampling: no finite logit among candidates");
    }

    std::vector<double> probs(candidates.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        probs[i] = std::exp(static_cast<double>((logits[candidates[i]] - max_v) / temperature));
        sum += probs[i];
    }

    const double u = rng.next_double() * sum;
    double acc = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<TokenId>(candidates[i]);
    }
    return static_cast<TokenId>(candidates.back()); // u == sum after rounding
}

} // namespace

TokenId sample_token(std::span<const float> logits, const DecodeStrategy& strategy,
                     SplitMix64& rng) {
    if (logits.empty()) throw SamplingError("sample_token: empty logits");
    if (strategy.kind == DecodeStrategy::Kind::greedy) {
        return sample_greedy(logits);
    }
    if (!(strategy.temperature > 0.0f)) {
        throw SamplingError("temperature must be positive");
    }
    return sample_temperature(logits, strategy.temperature, strategy.top_k, rng);
}

} // namespace ringlm
