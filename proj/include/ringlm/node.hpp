#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ringlm/control.hpp"
#include "ringlm/engine.hpp"
#include "ringlm/net.hpp"
#include "ringlm/queue.hpp"
#include "ringlm/wire.hpp"

namespace ringlm {

// Test/bench instrumentation points. stage_delay simulates per-stage compute
// cost; the processed hook runs in the processor role right after a forward
// (and may throw, which aborts the node like any processing failure); the
// sent hook runs in the sender role just before a frame hits the wire.
struct NodeHooks {
    std::chrono::milliseconds stage_delay{0};
    std::function<void(const ActivationFrame&)> on_frame_processed;
    std::function<void(const ActivationFrame&)> on_frame_sent;
};

struct NodeStats {
    std::uint64_t frames_processed = 0;
    std::chrono::nanoseconds busy{0};
    std::chrono::steady_clock::time_point first_start{};
    std::chrono::steady_clock::time_point last_end{};

    // Busy fraction of the node's active span [first forward start, last
    // forward end].
    double utilization() const;
};

// One generated-token event at the starter.
struct TokenRecord {
    double elapsed_seconds = 0.0;
    std::uint32_t sample_id = 0;
    std::size_t global_index = 0;
};

struct StarterOutcome {
    GenerationResult result;
    std::vector<TokenRecord> timeline;
    NodeStats stats;
};

struct StarterOptions {
    std::chrono::milliseconds setup_deadline{10000};
    std::chrono::milliseconds drain_deadline{30000};
    NodeHooks hooks;
};

// How secondaries obtain their weights during setup: a weight file they can
// read themselves, or chunks sliced here and shipped inline.
struct WeightSourceSpec {
    std::optional<std::string> path;
    const WeightStore* store = nullptr;
};

// The ring's entry point: owns embedding + first blocks + final norm + LM
// head, coordinates setup and stop, runs the round-robin generation loop.
class StarterNode {
public:
    StarterNode(ChunkWeights chunk, StarterOptions options);
    ~StarterNode();

    // Binds the starter's data listener (port 0 picks one); must happen
    // before setup_ring so the last secondary can connect back.
    std::uint16_t bind_data(const std::string& host, std::uint16_t port);

    // Initializes secondaries farthest-first over the control plane, then
    // closes the ring. Throws SetupError when a node cannot be set up.
    void setup_ring(const NodeTopology& topology, const PartitionPlan& plan,
                    const WeightSourceSpec& weights, std::size_t n_samples);

    // Single-node mode: the starter owns every layer and the output queue
    // feeds straight back into the input queue.
    void setup_self_loop();

    // Runs the whole job. On an internal failure the outcome carries the
    // diagnostic and whatever tokens were produced.
    StarterOutcome run(const GenerationJob& job);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SecondaryOptions {
    std::string listen_host = "127.0.0.1";
    std::uint16_t control_port = 0; // 0 = ephemeral
    std::uint16_t data_port = 0;
    std::chrono::milliseconds init_wait{30000};      // run_until_stopped: max wait for /init
    std::chrono::milliseconds connect_deadline{10000}; // connecting to the successor
    std::chrono::milliseconds accept_deadline{30000};  // waiting for the predecessor
    std::chrono::milliseconds drain_deadline{30000};
    NodeHooks hooks;
};

// A worker node: HTTP control server (PUT /init, GET /health, POST /stop)
// plus the three-role data pipeline over its owned blocks.
class SecondaryService {
public:
    explicit SecondaryService(SecondaryOptions options);
    ~SecondaryService();

    // Binds data + control listeners and starts serving HTTP.
    void start();

    std::uint16_t control_port() const;
    std::uint16_t data_port() const;

    // Blocks until the node has stopped. Throws SetupError when no init
    // arrives within init_wait, PipelineError when the runtime aborted.
    void run_until_stopped();

    NodeStats stats() const;
    HealthStatus health_snapshot() const;

    // Force teardown: closes sockets, stops the HTTP server, joins threads.
    void shutdown();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ringlm
