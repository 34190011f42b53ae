#include "ringlm/partition.hpp"

#include <numeric>
#include <string>
#include <string_view>

#include "ringlm/error.hpp"
#include "tensor_io.hpp"

namespace ringlm {

namespace {

constexpr char kChunkMagic[4] = {'M', 'D', 'I', 'C'};
constexpr std::uint32_t kChunkVersion = 1;

} // namespace

std::pair<std::size_t, std::size_t> PartitionPlan::block_range(std::size_t node_index) const {
    if (node_index >= n_nodes) {
        throw PlanError("node index " + std::to_string(node_index) + " out of range for " +
                        std::to_string(n_nodes) + " nodes");
    }
    std::size_t start = 0;
    for (std::size_t i = 0; i < node_index; ++i) start += block_counts[i];
    return {start, start + block_counts[node_index]};
}

PartitionPlan make_partition_plan(const ModelConfig& config, std::size_t n_nodes,
                                  const std::optional<std::vector<std::size_t>>& explicit_counts) {
    const std::size_t n_blocks = config.n_blocks;
    if (n_nodes < 1) throw PlanError("a ring needs at least one node");

    PartitionPlan plan;
    plan.n_nodes = n_nodes;

    if (explicit_counts) {
        if (explicit_counts->size() != n_nodes) {
            throw PlanError("explicit split has " + std::to_string(explicit_counts->size()) +
                            " entries for " + std::to_string(n_nodes) + " nodes");
        }
        const std::size_t sum =
            std::accumulate(explicit_counts->begin(), explicit_counts->end(), std::size_t{0});
        if (sum != n_blocks) {
            throw PlanError("explicit split sums to " + std::to_string(sum) + ", model has " +
                            std::to_string(n_blocks) + " blocks");
        }
        plan.block_counts = *explicit_counts;
        return plan;
    }

    if (n_nodes > n_blocks + 1) {
        throw PlanError(std::to_string(n_nodes) + " nodes cannot split " +
                        std::to_string(n_blocks) + " blocks (at most n_blocks + 1 nodes)");
    }

    const std::size_t q = n_blocks / n_nodes;
    plan.block_counts.assign(n_nodes, q);
    std::size_t remainder = n_blocks - q * n_nodes;
    // Extra blocks go to the secondaries nearest the ring's end, keeping the
    // starter (which also runs embedding, LM head and sampling) lightest.
    for (std::size_t i = n_nodes; remainder > 0 && i-- > 1;) {
        plan.block_counts[i] += 1;
        --remainder;
    }
    return plan;
}

ChunkWeights slice_chunk(const WeightStore& store, const PartitionPlan& plan,
                         std::size_t node_index) {
    const auto [start, end] = plan.block_range(node_index);
    ChunkWeights chunk;
    chunk.role = node_index == 0 ? NodeRole::starter : NodeRole::secondary;
    chunk.config = store.config;
    chunk.block_start = start;
    chunk.block_end = end;
    chunk.blocks.assign(store.blocks.begin() + static_cast<std::ptrdiff_t>(start),
                        store.blocks.begin() + static_cast<std::ptrdiff_t>(end));
    if (chunk.role == NodeRole::starter) {
        chunk.embedding = store.embedding;
        chunk.final_norm = store.final_norm;
        chunk.lm_head = store.lm_head;
    }
    return chunk;
}

ChunkWeights slice_block_range(const WeightStore& store, std::size_t block_start,
                               std::size_t block_end) {
    if (block_end < block_start || block_end > store.config.n_blocks) {
        throw PlanError("block range [" + std::to_string(block_start) + ", " +
                        std::to_string(block_end) + ") invalid for " +
                        std::to_string(store.config.n_blocks) + " blocks");
    }
    ChunkWeights chunk;
    chunk.role = NodeRole::secondary;
    chunk.config = store.config;
    chunk.block_start = block_start;
    chunk.block_end = block_end;
    chunk.blocks.assign(store.blocks.begin() + static_cast<std::ptrdiff_t>(block_start),
                        store.blocks.begin() + static_cast<std::ptrdiff_t>(block_end));
    return chunk;
}

std::uint64_t chunk_parameter_count(const ModelConfig& config, const PartitionPlan& plan,
                                    std::size_t node_index) {
    const auto [start, end] = plan.block_range(node_index);
    std::uint64_t n = static_cast<std::uint64_t>(end - start) * block_parameter_count(config);
    if (node_index == 0) {
        n += static_cast<std::uint64_t>(config.vocab_size) * config.d_model; // embedding
        n += config.d_model;                                                 // final norm
        n += static_cast<std::uint64_t>(config.d_model) * config.vocab_size; // lm head
    }
    return n;
}

std::uint64_t MemoryEstimate::max_node_bytes() const {
    std::uint64_t best = 0;
    for (std::uint64_t b : per_node_bytes) best = std::max(best, b);
    return best;
}

MemoryEstimate estimate_memory(const PartitionPlan& plan, const ModelConfig& config,
                               std::size_t n_samples, std::size_t context_len) {
    MemoryEstimate est;
    est.per_node_bytes.reserve(plan.n_nodes);
    const std::uint64_t cache_per_block = 4ull * n_samples * 2ull * config.n_kv_heads *
                                          config.d_head * context_len;
    for (std::size_t i = 0; i < plan.n_nodes; ++i) {
        const std::uint64_t params = chunk_parameter_count(config, plan, i);
        const std::uint64_t bytes = 4ull * params + cache_per_block * plan.block_counts[i];
        est.per_node_bytes.push_back(bytes);
        est.total_bytes += bytes;
    }
    return est;
}

std::vector<std::uint8_t> serialize_chunk(const ChunkWeights& chunk) {
    detail::ByteWriter w;
    w.bytes(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(kChunkMagic), 4));
    w.u32(kChunkVersion);
    w.u8(chunk.role == NodeRole::starter ? 0 : 1);
    detail::write_model_config(w, chunk.config);
    w.u32(static_cast<std::uint32_t>(chunk.block_start));
    w.u32(static_cast<std::uint32_t>(chunk.block_end));
    for (const BlockWeights& b : chunk.blocks) detail::write_block_weights(w, b);
    if (chunk.role == NodeRole::starter) {
        detail::write_matrix(w, chunk.embedding);
        detail::write_vector(w, chunk.final_norm);
        detail::write_matrix(w, chunk.lm_head);
    }
    return w.take();
}

ChunkWeights parse_chunk(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r(bytes);
    char magic[4];
    for (char& ch : magic) ch = static_cast<char>(r.u8());
    if (std::string_view(magic, 4) != std::string_view(kChunkMagic, 4)) {
        throw WeightIoError(WeightIoError::Kind::bad_magic, "not a chunk blob");
    }
    const std::uint32_t version = r.u32();
    if (version != kChunkVersion) {
        throw WeightIoError(WeightIoError::Kind::bad_version,
                            "unsupported chunk version " + std::to_string(version));
    }
    const std::uint8_t role = r.u8();
    if (role > 1) {
        throw WeightIoError(WeightIoError::Kind::bad_shape,
                            "unknown chunk role " + std::to_string(role));
    }

    ChunkWeights chunk;
    chunk.role = role == 0 ? NodeRole::starter : NodeRole::secondary;
    chunk.config = detail::read_model_config(r);
    chunk.config.validate();
    chunk.block_start = r.u32();
    chunk.block_end = r.u32();
    if (chunk.block_end < chunk.block_start || chunk.block_end > chunk.config.n_blocks) {
        throw WeightIoError(WeightIoError::Kind::bad_shape,
                            "chunk block range [" + std::to_string(chunk.block_start) + ", " +
                                std::to_string(chunk.block_end) + ") invalid for " +
                                std::to_string(chunk.config.n_blocks) + " blocks");
    }
    chunk.blocks.reserve(chunk.n_blocks_owned());
    for (std::size_t i = 0; i < chunk.n_blocks_owned(); ++i) {
        chunk.blocks.push_back(
            detail::read_block_weights(r, chunk.config, chunk.block_start + i));
    }
    if (chunk.role == NodeRole::starter) {
        chunk.embedding = detail::read_matrix(r, chunk.config.vocab_size, chunk.config.d_model,
                                              "embedding");
        chunk.final_norm = detail::read_vector(r, chunk.config.d_model, "final_norm");
        chunk.lm_head = detail::read_matrix(r, chunk.config.d_model, chunk.config.vocab_size,
                                            "lm_head");
    }
    if (!r.at_end()) {
        throw WeightIoError(WeightIoError::Kind::bad_shape,
                            std::to_string(r.remaining()) + " trailing bytes in chunk blob");
    }
    return chunk;
}

} // namespace ringlm
