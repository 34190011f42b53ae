#include "ringlm/control.hpp"

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ringlm/error.hpp"

namespace ringlm {

namespace {

using nlohmann::json;

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<std::uint8_t>& in) {
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= in.size(); i += 3) {
        const std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8) | in[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
    }
    const std::size_t rest = in.size() - i;
    if (rest == 1) {
        const std::uint32_t v = in[i] << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& in) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (in.size() % 4 != 0) throw SetupError("inline chunk is not valid base64");
    std::vector<std::uint8_t> out;
    out.reserve(in.size() / 4 * 3);
    for (std::size_t i = 0; i < in.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            const char c = in[i + j];
            if (c == '=' && i + 4 == in.size() && j >= 2) {
                vals[j] = 0;
                ++pad;
            } else {
                vals[j] = value_of(c);
                if (vals[j] < 0 || pad > 0) {
                    throw SetupError("inline chunk is not valid base64");
                }
            }
        }
        const std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

json config_to_json(const ModelConfig& c) {
    return json{{"vocab_size", c.vocab_size}, {"n_blocks", c.n_blocks},
                {"d_model", c.d_model},       {"n_heads", c.n_heads},
                {"n_kv_heads", c.n_kv_heads}, {"d_head", c.d_head},
                {"context_len", c.context_len}, {"d_ffn", c.d_ffn},
                {"rope_theta", c.rope_theta}, {"rmsnorm_eps", c.rmsnorm_eps}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<std::uint32_t>();
    c.n_blocks = j.at("n_blocks").get<std::uint32_t>();
    c.d_model = j.at("d_model").get<std::uint32_t>();
    c.n_heads = j.at("n_heads").get<std::uint32_t>();
    c.n_kv_heads = j.at("n_kv_heads").get<std::uint32_t>();
    c.d_head = j.at("d_head").get<std::uint32_t>();
    c.context_len = j.at("context_len").get<std::uint32_t>();
    c.d_ffn = j.at("d_ffn").get<std::uint32_t>();
    c.rope_theta = j.at("rope_theta").get<float>();
    c.rmsnorm_eps = j.at("rmsnorm_eps").get<float>();
    return c;
}

json endpoint_to_json(const NodeEndpoint& e) {
    return json{{"host", e.host}, {"data_port", e.data_port}, {"control_port", e.control_port}};
}

NodeEndpoint endpoint_from_json(const json& j) {
    NodeEndpoint e;
    e.host = j.at("host").get<std::string>();
    e.data_port = j.at("data_port").get<std::uint16_t>();
    e.control_port = j.at("control_port").get<std::uint16_t>();
    return e;
}

httplib::Client make_client(const NodeEndpoint& endpoint, std::chrono::milliseconds timeout) {
    httplib::Client cli(endpoint.host, endpoint.control_port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    return cli;
}

} // namespace

void NodeTopology::validate() const {
    if (nodes.empty()) throw ConfigError("topology has no nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].host.empty()) {
            throw ConfigError("node " + std::to_string(i) + " has no host");
        }
        if (nodes[i].data_port == 0 || nodes[i].control_port == 0) {
            throw ConfigError("node " + std::to_string(i) + " has an unresolved port");
        }
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            const bool same_host = nodes[i].host == nodes[j].host;
            if (same_host && (nodes[i].data_port == nodes[j].data_port ||
                              nodes[i].control_port == nodes[j].control_port)) {
                throw ConfigError("nodes " + std::to_string(i) + " and " + std::to_string(j) +
                                  " share a port on " + nodes[i].host);
            }
        }
    }
}

std::string init_request_to_json(const InitRequest& req) {
    json j;
    j["config"] = config_to_json(req.config);
    j["node_index"] = req.node_index;
    j["block_start"] = req.block_start;
    j["block_end"] = req.block_end;
    if (req.weights_path) j["weights_path"] = *req.weights_path;
    if (req.inline_chunk) j["inline_chunk"] = base64_encode(*req.inline_chunk);
    j["prev"] = endpoint_to_json(req.prev);
    j["next"] = endpoint_to_json(req.next);
    j["n_samples"] = req.n_samples;
    return j.dump();
}

InitRequest init_request_from_json(const std::string& body) {
    try {
        const json j = json::parse(body);
        InitRequest req;
        req.config = config_from_json(j.at("config"));
        req.node_index = j.at("node_index").get<std::uint32_t>();
        req.block_start = j.at("block_start").get<std::uint32_t>();
        req.block_end = j.at("block_end").get<std::uint32_t>();
        if (j.contains("weights_path")) {
            req.weights_path = j.at("weights_path").get<std::string>();
        }
        if (j.contains("inline_chunk")) {
            req.inline_chunk = base64_decode(j.at("inline_chunk").get<std::string>());
        }
        req.prev = endpoint_from_json(j.at("prev"));
        req.next = endpoint_from_json(j.at("next"));
        req.n_samples = j.at("n_samples").get<std::uint32_t>();
        return req;
    } catch (const json::exception& e) {
        throw SetupError(std::string("malformed init request: ") + e.what());
    }
}

void ControlClient::init_secondary(const NodeEndpoint& endpoint, const InitRequest& req,
                                   std::chrono::milliseconds deadline) {
    const std::string body = init_request_to_json(req);
    const auto give_up = std::chrono::steady_clock::now() + deadline;
    std::string last_error = "never reached";

    while (true) {
        httplib::Client cli = make_client(endpoint, std::chrono::milliseconds(2000));
        httplib::Result res = cli.Put("/init", body, "application/json");
        if (res) {
            if (res->status == 200) return;
            if (res->status == 409) return; // already initialized: a lost ack, not a failure
            throw SetupError("node " + endpoint.host + ":" +
                             std::to_string(endpoint.control_port) + " rejected init (" +
                             std::to_string(res->status) + "): " + res->body);
        }
        last_error = httplib::to_string(res.error());
        if (std::chrono::steady_clock::now() >= give_up) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    throw SetupError("cannot reach " + endpoint.host + ":" +
                     std::to_string(endpoint.control_port) + " for init within " +
                     std::to_string(deadline.count()) + " ms: " + last_error);
}

HealthStatus ControlClient::health(const NodeEndpoint& endpoint,
                                   std::chrono::milliseconds timeout) {
    httplib::Client cli = make_client(endpoint, timeout);
    httplib::Result res = cli.Get("/health");
    if (!res || res->status != 200) {
        throw SetupError("health check of " + endpoint.host + ":" +
                         std::to_string(endpoint.control_port) + " failed: " +
                         (res ? "status " + std::to_string(res->status)
                              : httplib::to_string(res.error())));
    }
    try {
        const json j = json::parse(res->body);
        HealthStatus h;
        h.status = j.at("status").get<std::string>();
        h.role = j.at("role").get<std::string>();
        if (j.contains("blocks") && j.at("blocks").is_array()) {
            h.blocks = {j.at("blocks").at(0).get<std::uint32_t>(),
                        j.at("blocks").at(1).get<std::uint32_t>()};
        }
        h.frames_processed = j.value("frames_processed", std::uint64_t{0});
        return h;
    } catch (const json::exception& e) {
        throw SetupError(std::string("malformed health response: ") + e.what());
    }
}

std::vector<StopResult> ControlClient::advertise_stop(const NodeTopology& topology,
                                                      std::chrono::milliseconds per_node_timeout) {
    std::vector<StopResult> results;
    for (std::size_t i = 1; i < topology.n_nodes(); ++i) {
        const NodeEndpoint& endpoint = topology.nodes[i];
        StopResult r;
        r.endpoint = endpoint;
        httplib::Client cli = make_client(endpoint, per_node_timeout);
        httplib::Result res = cli.Post("/stop", "", "application/json");
        if (res && res->status == 200) {
            r.acked = true;
            r.detail = res->body;
        } else {
            r.acked = false;
            r.detail = res ? "status " + std::to_string(res->status)
                           : httplib::to_string(res.error());
        }
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace ringlm
