#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ringlm/config.hpp"

namespace ringlm {

struct NodeEndpoint {
    std::string host;
    std::uint16_t data_port = 0;
    std::uint16_t control_port = 0;

    bool operator==(const NodeEndpoint&) const = default;
};

// Ring overlay: node 0 is the starter, the successor of i is (i+1) mod P,
// so the last secondary feeds back into the starter.
struct NodeTopology {
    std::vector<NodeEndpoint> nodes;

    std::size_t n_nodes() const { return nodes.size(); }
    const NodeEndpoint& successor(std::size_t i) const { return nodes[(i + 1) % nodes.size()]; }
    const NodeEndpoint& predecessor(std::size_t i) const {
        return nodes[(i + nodes.size() - 1) % nodes.size()];
    }

    // Throws ConfigError when empty or endpoints collide.
    void validate() const;
};

// Body of PUT /init. The chunk either sits in a weight file the node can
// read (path) or rides along base64-encoded (inline).
struct InitRequest {
    ModelConfig config;
    std::uint32_t node_index = 0;
    std::uint32_t block_start = 0;
    std::uint32_t block_end = 0; // half-open
    std::optional<std::string> weights_path;
    std::optional<std::vector<std::uint8_t>> inline_chunk;
    NodeEndpoint prev;
    NodeEndpoint next;
    std::uint32_t n_samples = 0;
};

std::string init_request_to_json(const InitRequest& req);
InitRequest init_request_from_json(const std::string& body); // throws SetupError

struct HealthStatus {
    std::string status; // "uninitialized" | "ready" | "stopped" | "failed"
    std::string role;
    std::optional<std::pair<std::uint32_t, std::uint32_t>> blocks;
    std::uint64_t frames_processed = 0;
};

struct StopResult {
    NodeEndpoint endpoint;
    bool acked = false;
    std::string detail;
};

// HTTP client side of the control plane (the starter drives it).
class ControlClient {
public:
    // PUT /init, retried until the deadline so a still-starting secondary
    // can come up. Throws SetupError on rejection or deadline expiry.
    static void init_secondary(const NodeEndpoint& endpoint, const InitRequest& req,
                               std::chrono::milliseconds deadline);

    // GET /health. Throws SetupError when the node is unreachable.
    static HealthStatus health(const NodeEndpoint& endpoint,
                               std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

    // POST /stop to every secondary; unreachable nodes are reported, never
    // thrown. Idempotent.
    static std::vector<StopResult> advertise_stop(
        const NodeTopology& topology,
        std::chrono::milliseconds per_node_timeout = std::chrono::milliseconds(30000));
};

} // namespace ringlm
