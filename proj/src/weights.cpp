#include "ringlm/weights.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "ringlm/error.hpp"
#include "ringlm/rng.hpp"
#include "tensor_io.hpp"

namespace ringlm {

namespace {

constexpr char kWeightMagic[4] = {'M', 'D', 'I', 'W'};
constexpr std::uint32_t kWeightVersion = 1;

void fill_gaussian(SplitMix64& rng, std::span<float> out, float stddev) {
    for (float& v : out) v = rng.next_gaussian() * stddev;
}

} // namespace

WeightStore init_random_weights(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    const std::size_t d = config.d_model;
    const std::size_t kv_dim = static_cast<std::size_t>(config.n_kv_heads) * config.d_head;
    const float base_std = 0.02f;
    // Residual-branch output projections are damped with depth so activations
    // stay O(1) at init regardless of block count.
    const float resid_std = base_std / std::sqrt(2.0f * static_cast<float>(config.n_blocks));

    SplitMix64 rng(seed);
    WeightStore store;
    store.config = config;

    store.embedding = Matrix(config.vocab_size, d);
    fill_gaussian(rng, store.embedding.data, base_std);

    store.blocks.reserve(config.n_blocks);
    for (std::uint32_t i = 0; i < config.n_blocks; ++i) {
        BlockWeights b;
        b.attn_norm.assign(d, 1.0f);
        b.wq = Matrix(d, d);
        fill_gaussian(rng, b.wq.data, base_std);
        b.wk = Matrix(d, kv_dim);
        fill_gaussian(rng, b.wk.data, base_std);
        b.wv = Matrix(d, kv_dim);
        fill_gaussian(rng, b.wv.data, base_std);
        b.wo = Matrix(d, d);
        fill_gaussian(rng, b.wo.data, resid_std);
        b.ffn_norm.assign(d, 1.0f);
        b.w_gate = Matrix(d, config.d_ffn);
        fill_gaussian(rng, b.w_gate.data, base_std);
        b.w_up = Matrix(d, config.d_ffn);
        fill_gaussian(rng, b.w_up.data, base_std);
        b.w_down = Matrix(config.d_ffn, d);
        fill_gaussian(rng, b.w_down.data, resid_std);
        store.blocks.push_back(std::move(b));
    }

    store.final_norm.assign(d, 1.0f);
    store.lm_head = Matrix(d, config.vocab_size);
    fill_gaussian(rng, store.lm_head.data, base_std);
    return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
    detail::ByteWriter w;
    w.bytes(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(kWeightMagic), 4));
    w.u32(kWeightVersion);
    detail::write_model_config(w, store.config);
    detail::write_matrix(w, store.embedding);
    for (const BlockWeights& b : store.blocks) detail::write_block_weights(w, b);
    detail::write_vector(w, store.final_norm);
    detail::write_matrix(w, store.lm_head);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw WeightIoError(WeightIoError::Kind::io,
                            "cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(w.data().data()),
              static_cast<std::streamsize>(w.data().size()));
    if (!out) {
        throw WeightIoError(WeightIoError::Kind::io, "short write to " + path.string());
    }
}

WeightStore load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw WeightIoError(WeightIoError::Kind::io, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw WeightIoError(WeightIoError::Kind::io, "read failure on " + path.string());
    }

    detail::ByteReader r(bytes);
    char magic[4];
    for (char& ch : magic) ch = static_cast<char>(r.u8());
    if (std::string_view(magic, 4) != std::string_view(kWeightMagic, 4)) {
        throw WeightIoError(WeightIoError::Kind::bad_magic,
                            path.string() + " is not a weight file");
    }
    const std::uint32_t version = r.u32();
    if (version != kWeightVersion) {
        throw WeightIoError(WeightIoError::Kind::bad_version,
                            "unsupported weight file version " + std::to_string(version));
    }

    WeightStore store;
    store.config = detail::read_model_config(r);
    store.config.validate();
    store.embedding =
        detail::read_matrix(r, store.config.vocab_size, store.config.d_model, "embedding");
    store.blocks.reserve(store.config.n_blocks);
    for (std::uint32_t i = 0; i < store.config.n_blocks; ++i) {
        store.blocks.push_back(detail::read_block_weights(r, store.config, i));
    }
    store.final_norm = detail::read_vector(r, store.config.d_model, "final_norm");
    store.lm_head =
        detail::read_matrix(r, store.config.d_model, store.config.vocab_size, "lm_head");
    if (!r.at_end()) {
        throw WeightIoError(WeightIoError::Kind::bad_shape,
                            std::to_string(r.remaining()) + " trailing bytes in " +
                                path.string());
    }
    return store;
}

} // namespace ringlm
