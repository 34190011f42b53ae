#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ringlm/weights.hpp"

namespace ringlm {

// Assignment of transformer blocks to ring positions. Node 0 is the starter
// and additionally owns the token embedding, final norm and LM head; nodes
// 1..n-1 own contiguous block ranges in ring order.
struct PartitionPlan {
    std::size_t n_nodes = 0;
    std::vector<std::size_t> block_counts; // length n_nodes, index 0 = starter

    std::size_t starter_blocks() const { return block_counts.at(0); }

    // Half-open block range [start, end) owned by a node.
    std::pair<std::size_t, std::size_t> block_range(std::size_t node_index) const;

    bool operator==(const PartitionPlan&) const = default;
};

// Build a plan. Explicit per-node counts are honored verbatim (they must sum
// to n_blocks). The default heuristic gives the starter floor(n_blocks / n)
// blocks and each secondary the same, with the remainder spread over the
// secondaries from the end of the ring, so the starter is never heavier than
// a secondary. Throws PlanError on inconsistent counts or
// n_nodes > n_blocks + 1.
PartitionPlan make_partition_plan(const ModelConfig& config, std::size_t n_nodes,
                                  const std::optional<std::vector<std::size_t>>& explicit_counts = std::nullopt);

enum class NodeRole { starter, secondary };

// One node's slice of the model.
struct ChunkWeights {
    NodeRole role = NodeRole::starter;
    ModelConfig config;
    std::size_t block_start = 0;
    std::size_t block_end = 0; // half-open
    std::vector<BlockWeights> blocks;
    // Starter only:
    Matrix embedding;
    std::vector<float> final_norm;
    Matrix lm_head;

    std::size_t n_blocks_owned() const { return block_end - block_start; }
};

// Copy node_index's chunk out of a full store. Throws PlanError on a bad index.
ChunkWeights slice_chunk(const WeightStore& store, const PartitionPlan& plan,
                         std::size_t node_index);

// Secondary-role chunk for a bare block range (what an init request names).
ChunkWeights slice_block_range(const WeightStore& store, std::size_t block_start,
                               std::size_t block_end);

// Closed-form parameter count of one chunk (no allocation).
std::uint64_t chunk_parameter_count(const ModelConfig& config, const PartitionPlan& plan,
                                    std::size_t node_index);

struct MemoryEstimate {
    std::vector<std::uint64_t> per_node_bytes;
    std::uint64_t total_bytes = 0;

    std::uint64_t max_node_bytes() const;
};

// Analytic memory accounting: 4 bytes per owned parameter plus the full
// KV-cache footprint, 4 * n_samples * owned_blocks * 2 * n_kv_heads *
// d_head * context_len bytes per node.
MemoryEstimate estimate_memory(const PartitionPlan& plan, const ModelConfig& config,
                               std::size_t n_samples, std::size_t context_len);

// Chunk blob ("MDIC" magic) used to ship a chunk inline over the control
// plane; same tensor encoding as the weight file.
std::vector<std::uint8_t> serialize_chunk(const ChunkWeights& chunk);
ChunkWeights parse_chunk(const std::vector<std::uint8_t>& bytes);

} // namespace ringlm
