#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ringlm/config.hpp"
#include "ringlm/model.hpp"

namespace ringlm {

// Full set of model weights.
struct WeightStore {
    ModelConfig config;
    Matrix embedding;                // vocab_size x d_model
    std::vector<BlockWeights> blocks;
    std::vector<float> final_norm;   // d_model
    Matrix lm_head;                  // d_model x vocab_size
};

// Deterministic random initialization: projections and embeddings are
// N(0, 0.02^2), output projections (wo, w_down) are scaled down by
// sqrt(2 * n_blocks), norm vectors are ones. Same (config, seed) gives a
// bitwise-identical store.
WeightStore init_random_weights(const ModelConfig& config, std::uint64_t seed);

// Binary weight file: magic "MDIW", format version u32, serialized config,
// then every tensor in declaration order as little-endian f32 preceded by a
// u32 rank and u32 dims. Round-trips bitwise.
void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

} // namespace ringlm
