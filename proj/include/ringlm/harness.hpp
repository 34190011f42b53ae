#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ringlm/engine.hpp"
#include "ringlm/node.hpp"
#include "ringlm/partition.hpp"

namespace ringlm {

// Wall-clock record of every generated token, plus derived throughput
// figures. The first n_warmup tokens (one per sample) are the pipeline
// fill; steady-state rates are computed after them.
struct TokenTimeline {
    std::vector<TokenRecord> records;
    std::size_t n_warmup = 0;

    std::size_t size() const { return records.size(); }
    // Elapsed seconds until the k-th token (1-based count) exists.
    double time_to_token(std::size_t count) const;
    double steady_tokens_per_second() const;
    double steady_interval_seconds() const;
};

struct LocalRunConfig {
    const WeightStore* store = nullptr; // required; config comes from it
    std::size_t n_nodes = 1;
    std::optional<std::vector<std::size_t>> block_counts; // explicit split
    GenerationJob job;
    std::chrono::milliseconds stage_delay{0};
    std::chrono::milliseconds setup_deadline{10000};

    // Instrumentation across the whole ring; node index 0 is the starter.
    std::function<void(std::size_t node, const ActivationFrame&)> on_frame_sent;
    std::function<void(std::size_t node, const ActivationFrame&)> on_frame_processed;

    // Chunks at most this big ship inline through /init; larger ones go
    // through a temporary weight file on the shared filesystem.
    std::size_t inline_chunk_limit = 64ull << 20;
};

struct LocalRunOutcome {
    GenerationResult result;
    TokenTimeline timeline;
    std::vector<NodeStats> node_stats; // ring order, [0] = starter
    PartitionPlan plan;
};

// Spins up n_nodes-1 in-process secondaries on loopback, wires the ring over
// real TCP + HTTP control, runs the job on the starter, and tears everything
// down. n_nodes == 1 degenerates to the self-loop starter.
LocalRunOutcome run_local(const LocalRunConfig& config);

struct VerifyReport {
    bool identical = false;
    std::size_t tokens_checked = 0;
    double max_logit_deviation = 0.0;
    // (sample, position) of the first token mismatch, when any.
    std::optional<std::pair<std::size_t, std::size_t>> first_divergence;
    std::string summary() const;
};

// Runs the same job through the distributed ring and the single-process
// reference model, then compares token streams and final-step logits.
VerifyReport run_verify(const WeightStore& store, const GenerationJob& job,
                        std::size_t n_nodes,
                        const std::optional<std::vector<std::size_t>>& block_counts = std::nullopt);

// token_index,elapsed_seconds,sample_id,node_count — one row per generated
// token in emission order.
void write_bench_csv(const std::filesystem::path& path, const TokenTimeline& timeline,
                     std::size_t node_count);

} // namespace ringlm
