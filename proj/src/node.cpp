#include "ringlm/node.hpp"

#include <atomic>
#include <exception>
#include <iostream>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ringlm/error.hpp"
#include "ringlm/weights.hpp"

namespace ringlm {

namespace {

using nlohmann::json;

void send_frame(TcpStream& stream, const ActivationFrame& frame) {
    const std::vector<std::uint8_t> bytes = encode_frame(frame);
    stream.write_all(bytes.data(), bytes.size());
}

// Accumulates one processing interval into the stats.
void note_busy(NodeStats& stats, std::chrono::steady_clock::time_point start,
               std::chrono::steady_clock::time_point end) {
    if (stats.frames_processed == 0) stats.first_start = start;
    stats.last_end = end;
    stats.busy += end - start;
    stats.frames_processed += 1;
}

} // namespace

double NodeStats::utilization() const {
    if (frames_processed == 0) return 0.0;
    const auto span = last_end - first_start;
    if (span.count() <= 0) return 1.0;
    return std::chrono::duration<double>(busy).count() /
           std::chrono::duration<double>(span).count();
}

// ---------------------------------------------------------------------------
// StarterNode

struct StarterNode::Impl {
    ChunkWeights chunk;
    StarterOptions opts;

    TcpListener listener;
    TcpStream prev_in;  // from the last secondary
    TcpStream next_out; // to the first secondary
    bool self_loop = false;
    bool ring_ready = false;
    std::optional<NodeTopology> topology;
};

StarterNode::StarterNode(ChunkWeights chunk, StarterOptions options)
    : impl_(std::make_unique<Impl>()) {
    if (chunk.role != NodeRole::starter) {
        throw SetupError("starter node needs a starter-role chunk");
    }
    impl_->chunk = std::move(chunk);
    impl_->opts = std::move(options);
}

StarterNode::~StarterNode() = default;

std::uint16_t StarterNode::bind_data(const std::string& host, std::uint16_t port) {
    impl_->listener = TcpListener::bind(host, port);
    return impl_->listener.port();
}

void StarterNode::setup_ring(const NodeTopology& topology, const PartitionPlan& plan,
                             const WeightSourceSpec& weights, std::size_t n_samples) {
    topology.validate();
    if (topology.n_nodes() != plan.n_nodes) {
        throw SetupError("topology has " + std::to_string(topology.n_nodes()) +
                         " nodes, plan has " + std::to_string(plan.n_nodes));
    }
    if (topology.n_nodes() < 2) {
        throw SetupError("a networked ring needs at least two nodes");
    }
    if (!impl_->listener.valid()) {
        throw SetupError("bind the data listener before setting up the ring");
    }
    const auto [my_start, my_end] = plan.block_range(0);
    if (my_start != impl_->chunk.block_start || my_end != impl_->chunk.block_end) {
        throw SetupError("starter chunk blocks [" + std::to_string(impl_->chunk.block_start) +
                         ", " + std::to_string(impl_->chunk.block_end) +
                         ") do not match the plan");
    }
    if (!weights.path && weights.store == nullptr) {
        throw SetupError("no weight source for the secondaries");
    }

    // Farthest ring position first, so by the time a node's predecessor is
    // initialized its successor is already listening.
    const std::size_t P = topology.n_nodes();
    for (std::size_t i = P; i-- > 1;) {
        const auto [start, end] = plan.block_range(i);
        InitRequest req;
        req.config = impl_->chunk.config;
        req.node_index = static_cast<std::uint32_t>(i);
        req.block_start = static_cast<std::uint32_t>(start);
        req.block_end = static_cast<std::uint32_t>(end);
        if (weights.path) {
            req.weights_path = *weights.path;
        } else {
            req.inline_chunk = serialize_chunk(slice_chunk(*weights.store, plan, i));
        }
        req.prev = topology.predecessor(i);
        req.next = topology.successor(i);
        req.n_samples = static_cast<std::uint32_t>(n_samples);
        ControlClient::init_secondary(topology.nodes[i], req, impl_->opts.setup_deadline);
    }

    // Node P-1 connected to us while handling its init; ours is the last
    // data edge, closing the ring.
    try {
        impl_->prev_in = impl_->listener.accept(impl_->opts.setup_deadline);
        impl_->next_out = connect_with_retry(topology.nodes[1].host,
                                             topology.nodes[1].data_port,
                                             impl_->opts.setup_deadline);
    } catch (const NetError& e) {
        throw SetupError(std::string("closing the ring failed: ") + e.what());
    }

    impl_->topology = topology;
    impl_->self_loop = false;
    impl_->ring_ready = true;
}

void StarterNode::setup_self_loop() {
    impl_->self_loop = true;
    impl_->ring_ready = true;
}

StarterOutcome StarterNode::run(const GenerationJob& job) {
    Impl& im = *impl_;
    if (!im.ring_ready) throw SetupError("ring not set up");
    job.validate(im.chunk.config);

    const std::size_t S = job.n_samples();
    const std::uint32_t d_model = im.chunk.config.d_model;

    StarterOutcome outcome;
    outcome.result.tokens = job.prompts;
    outcome.result.final_logits.resize(S);

    BoundedQueue<ActivationFrame> input_q(2 * S);
    BoundedQueue<ActivationFrame> output_q(2 * S);

    std::atomic<bool> stop_seen{false};
    std::exception_ptr receiver_error;
    std::exception_ptr sender_error;
    std::thread receiver;
    std::thread sender;

    if (im.self_loop) {
        // No sockets: the sender role degenerates to moving frames from the
        // output queue back into the input queue.
        sender = std::thread([&] {
            try {
                while (auto f = output_q.take()) {
                    if (im.opts.hooks.on_frame_sent) im.opts.hooks.on_frame_sent(*f);
                    if (f->type == MsgType::stop) break;
                    input_q.put(std::move(*f));
                }
            } catch (...) {
                sender_error = std::current_exception();
                input_q.fail("self-loop forwarder aborted");
            }
        });
    } else {
        receiver = std::thread([&] {
            try {
                SocketSource source(im.prev_in);
                while (true) {
                    auto f = read_frame(source);
                    if (!f) {
                        throw PipelineError("ring connection closed before stop");
                    }
                    if (f->type == MsgType::stop) {
                        stop_seen.store(true);
                        break;
                    }
                    input_q.put(std::move(*f));
                }
            } catch (...) {
                if (!stop_seen.load()) {
                    receiver_error = std::current_exception();
                    input_q.fail("receiver aborted");
                }
            }
        });
        sender = std::thread([&] {
            try {
                while (auto f = output_q.take()) {
                    if (im.opts.hooks.on_frame_sent) im.opts.hooks.on_frame_sent(*f);
                    const bool is_stop = f->type == MsgType::stop;
                    send_frame(im.next_out, *f);
                    if (is_stop) break;
                }
            } catch (...) {
                sender_error = std::current_exception();
                output_q.fail("sender aborted");
                im.prev_in.shutdown(); // unblock the receiver as well
            }
        });
    }

    // Processor role, on this thread: round-robin over samples, one frame
    // per sample per round, so every sample keeps a frame in flight.
    KVCacheSet caches(S, im.chunk.n_blocks_owned());
    std::vector<SplitMix64> rngs = make_sample_rngs(job.seed, S);
    std::vector<std::size_t> budget(S);
    std::size_t max_rounds = 0;
    for (std::size_t n = 0; n < S; ++n) {
        budget[n] = job.n_tokens - job.prompts[n].size();
        max_rounds = std::max(max_rounds, budget[n]);
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::size_t global_index = 0;

    try {
        for (std::size_t round = 0; round <= max_rounds; ++round) {
            for (std::size_t n = 0; n < S; ++n) {
                if (budget[n] == 0 || round > budget[n]) continue;

                if (round == 0) {
                    // Full prompt pass; later rounds ride on the caches.
                    const auto start = std::chrono::steady_clock::now();
                    if (im.opts.hooks.stage_delay.count() > 0) {
                        std::this_thread::sleep_for(im.opts.hooks.stage_delay);
                    }
                    caches.init_sample(n, im.chunk.config);
                    caches.rotate(n);
                    Matrix x = embed_tokens(im.chunk, outcome.result.tokens[n]);
                    Matrix y = forward_chunk(im.chunk, x, caches.active_caches(), 0);

                    ActivationFrame f;
                    f.type = MsgType::activation;
                    f.sample_id = static_cast<std::uint32_t>(n);
                    f.step = 0;
                    f.row_count = static_cast<std::uint32_t>(y.rows);
                    f.dim = d_model;
                    f.payload = std::move(y.data);
                    note_busy(outcome.stats, start, std::chrono::steady_clock::now());
                    if (im.opts.hooks.on_frame_processed) im.opts.hooks.on_frame_processed(f);
                    output_q.put(std::move(f));
                    continue;
                }

                auto f = input_q.take();
                if (!f) throw PipelineError("input queue closed mid-generation");
                if (f->sample_id != n) {
                    throw ProtocolError("expected a frame of sample " + std::to_string(n) +
                                        ", got sample " + std::to_string(f->sample_id));
                }
                if (f->dim != d_model || f->row_count == 0) {
                    throw ProtocolError("returning frame has shape " +
                                        std::to_string(f->row_count) + "x" +
                                        std::to_string(f->dim) + ", expected rows x " +
                                        std::to_string(d_model));
                }
                const std::size_t prompt_len = job.prompts[n].size();
                const std::uint32_t expected_step = round == 1
                    ? 0
                    : static_cast<std::uint32_t>(prompt_len + round - 2);
                if (f->step != expected_step) {
                    throw ProtocolError("sample " + std::to_string(n) + " returned step " +
                                        std::to_string(f->step) + ", expected " +
                                        std::to_string(expected_step));
                }

                const auto start = std::chrono::steady_clock::now();
                if (im.opts.hooks.stage_delay.count() > 0) {
                    std::this_thread::sleep_for(im.opts.hooks.stage_delay);
                }
                std::span<const float> last_row(
                    f->payload.data() + static_cast<std::size_t>(f->row_count - 1) * f->dim,
                    f->dim);
                std::vector<float> logits = output_logits(im.chunk, last_row);
                const TokenId token = sample_token(logits, job.decode, rngs[n]);
                outcome.result.tokens[n].push_back(token);
                outcome.timeline.push_back(
                    {std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                         .count(),
                     static_cast<std::uint32_t>(n), global_index++});

                if (round == budget[n]) {
                    outcome.result.final_logits[n] = std::move(logits);
                    note_busy(outcome.stats, start, std::chrono::steady_clock::now());
                    continue; // sample finished; nothing to circulate
                }

                caches.rotate(n);
                const std::size_t pos = outcome.result.tokens[n].size() - 1;
                Matrix x = embed_tokens(
                    im.chunk,
                    std::span<const TokenId>(&outcome.result.tokens[n].back(), 1));
                Matrix y = forward_chunk(im.chunk, x, caches.active_caches(), pos);

                ActivationFrame nf;
                nf.type = MsgType::activation;
                nf.sample_id = static_cast<std::uint32_t>(n);
                nf.step = static_cast<std::uint32_t>(pos);
                nf.row_count = 1;
                nf.dim = d_model;
                nf.payload = std::move(y.data);
                note_busy(outcome.stats, start, std::chrono::steady_clock::now());
                if (im.opts.hooks.on_frame_processed) im.opts.hooks.on_frame_processed(nf);
                output_q.put(std::move(nf));
            }
        }

        // Data-plane stop: circulate a stop frame and wait for it to come
        // back, which proves every secondary drained and forwarded it.
        output_q.put(ActivationFrame::stop());
        output_q.close();
        if (sender.joinable()) sender.join();
        if (receiver.joinable()) receiver.join();
        if (sender_error) std::rethrow_exception(sender_error);
        if (receiver_error) std::rethrow_exception(receiver_error);
        if (!im.self_loop && !stop_seen.load()) {
            throw PipelineError("stop frame never returned to the starter");
        }
    } catch (const std::exception& e) {
        outcome.result.error = e.what();
        input_q.fail(e.what());
        output_q.fail(e.what());
        im.prev_in.shutdown();
        im.next_out.shutdown();
        if (sender.joinable()) sender.join();
        if (receiver.joinable()) receiver.join();
    }

    // Control-plane stop is advisory on top of the data-plane stop frame;
    // nodes that already tore down are reported, not fatal.
    if (im.topology) {
        const auto acks = ControlClient::advertise_stop(*im.topology, im.opts.drain_deadline);
        for (const StopResult& r : acks) {
            if (!r.acked) {
                std::cerr << "warning: " << r.endpoint.host << ":" << r.endpoint.control_port
                          << " did not acknowledge stop: " << r.detail << "\n";
            }
        }
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// SecondaryService

struct SecondaryService::Impl {
    explicit Impl(SecondaryOptions o) : opts(std::move(o)) {}

    SecondaryOptions opts;

    TcpListener data_listener;
    httplib::Server server;
    std::thread server_thread;
    std::uint16_t control_port = 0;

    enum class State { uninitialized, ready, stopped, failed };

    mutable std::mutex mu;
    std::condition_variable cv;
    State state = State::uninitialized;
    std::string fail_reason;
    bool stop_acked = false;

    // Runtime, populated by /init.
    ChunkWeights chunk;
    KVCacheSet caches;
    std::vector<std::size_t> expected_step; // next token position per sample
    TcpStream prev_in;
    TcpStream next_out;
    std::unique_ptr<BoundedQueue<ActivationFrame>> in_q;
    std::unique_ptr<BoundedQueue<ActivationFrame>> out_q;
    std::thread receiver;
    std::thread processor;
    std::thread sender;

    std::atomic<std::uint64_t> frames_processed{0};
    mutable std::mutex stats_mu;
    NodeStats stats;

    const char* state_name() const {
        switch (state) {
            case State::uninitialized: return "uninitialized";
            case State::ready: return "ready";
            case State::stopped: return "stopped";
            case State::failed: return "failed";
        }
        return "unknown";
    }

    void fail_runtime(const std::string& reason) {
        {
            std::lock_guard<std::mutex> lk(mu);
            if (state == State::failed || state == State::stopped) return;
            state = State::failed;
            fail_reason = reason;
            // Both neighbors observe the teardown as closed connections.
            prev_in.shutdown();
            next_out.shutdown();
            data_listener.shutdown();
        }
        if (in_q) in_q->fail(reason);
        if (out_q) out_q->fail(reason);
        cv.notify_all();
    }

    void mark_stopped() {
        {
            std::lock_guard<std::mutex> lk(mu);
            if (state != State::ready) return;
            state = State::stopped;
        }
        cv.notify_all();
    }

    // Serialized: run_until_stopped and shutdown may race to reap the same
    // threads, and concurrent join() on one std::thread is undefined.
    std::mutex join_mu;

    void join_runtime() {
        std::lock_guard<std::mutex> lk(join_mu);
        if (receiver.joinable()) receiver.join();
        if (processor.joinable()) processor.join();
        if (sender.joinable()) sender.join();
    }

    void receiver_main() {
        try {
            TcpStream accepted = data_listener.accept(opts.accept_deadline);
            {
                std::lock_guard<std::mutex> lk(mu);
                prev_in = std::move(accepted);
            }
            SocketSource source(prev_in);
            while (true) {
                auto f = read_frame(source);
                if (!f) throw PipelineError("predecessor closed before stop");
                const bool is_stop = f->type == MsgType::stop;
                in_q->put(std::move(*f));
                if (is_stop) break;
            }
        } catch (const std::exception& e) {
            fail_runtime(std::string("receiver: ") + e.what());
        }
    }

    void processor_main() {
        try {
            while (true) {
                auto f = in_q->take();
                if (!f) break;
                if (f->type == MsgType::stop) {
                    out_q->put(std::move(*f));
                    out_q->close();
                    break;
                }
                process_one(*f);
            }
        } catch (const std::exception& e) {
            fail_runtime(std::string("processor: ") + e.what());
        }
    }

    void process_one(ActivationFrame& f) {
        const ModelConfig& config = chunk.config;
        if (f.sample_id >= caches.n_samples()) {
            throw ProtocolError("frame names sample " + std::to_string(f.sample_id) +
                                ", ring was initialized for " +
                                std::to_string(caches.n_samples()));
        }
        if (f.dim != config.d_model) {
            throw ProtocolError("frame dim " + std::to_string(f.dim) + " != d_model " +
                                std::to_string(config.d_model));
        }
        if (f.row_count == 0) throw ProtocolError("activation frame with zero rows");

        const std::size_t n = f.sample_id;
        if (!caches.sample_initialized(n)) {
            if (f.step != 0) {
                throw ProtocolError("first frame of sample " + std::to_string(n) +
                                    " starts at step " + std::to_string(f.step));
            }
            caches.init_sample(n, config);
        } else if (f.step != expected_step[n]) {
            throw ProtocolError("sample " + std::to_string(n) + " frame at step " +
                                std::to_string(f.step) + ", cache holds " +
                                std::to_string(expected_step[n]) + " tokens");
        }

        const auto start = std::chrono::steady_clock::now();
        if (opts.hooks.stage_delay.count() > 0) {
            std::this_thread::sleep_for(opts.hooks.stage_delay);
        }
        caches.rotate(n);
        Matrix x(f.row_count, f.dim);
        x.data = std::move(f.payload);
        Matrix y = forward_chunk(chunk, x, caches.active_caches(), f.step);
        expected_step[n] = f.step + f.row_count;

        ActivationFrame out;
        out.type = MsgType::activation;
        out.sample_id = f.sample_id;
        out.step = f.step; // carried unchanged around the ring
        out.row_count = f.row_count;
        out.dim = f.dim;
        out.payload = std::move(y.data);

        {
            std::lock_guard<std::mutex> lk(stats_mu);
            note_busy(stats, start, std::chrono::steady_clock::now());
        }
        frames_processed.fetch_add(1);
        if (opts.hooks.on_frame_processed) opts.hooks.on_frame_processed(out);
        out_q->put(std::move(out));
    }

    void sender_main() {
        try {
            bool sent_stop = false;
            while (auto f = out_q->take()) {
                if (opts.hooks.on_frame_sent) opts.hooks.on_frame_sent(*f);
                const bool is_stop = f->type == MsgType::stop;
                send_frame(next_out, *f);
                if (is_stop) {
                    sent_stop = true;
                    break;
                }
            }
            if (sent_stop) mark_stopped();
        } catch (const std::exception& e) {
            fail_runtime(std::string("sender: ") + e.what());
        }
    }

    void handle_init(const httplib::Request& req, httplib::Response& res) {
        auto reject = [&res](int status, const std::string& detail) {
            res.status = status;
            res.set_content(json{{"status", "error"}, {"detail", detail}}.dump(),
                            "application/json");
        };

        InitRequest init;
        try {
            init = init_request_from_json(req.body);
            init.config.validate();
        } catch (const std::exception& e) {
            reject(400, e.what());
            return;
        }

        {
            std::lock_guard<std::mutex> lk(mu);
            if (state != State::uninitialized) {
                reject(409, "already initialized");
                return;
            }
        }

        if (init.block_start > init.block_end || init.block_end > init.config.n_blocks) {
            reject(400, "invalid block range [" + std::to_string(init.block_start) + ", " +
                            std::to_string(init.block_end) + ")");
            return;
        }
        if (init.n_samples == 0) {
            reject(400, "n_samples must be positive");
            return;
        }
        const bool has_path = init.weights_path.has_value();
        const bool has_inline = init.inline_chunk.has_value();
        if (has_path == has_inline) {
            reject(400, "exactly one of weights_path or inline_chunk required");
            return;
        }

        ChunkWeights loaded;
        try {
            if (has_path) {
                const WeightStore store = load_weights(*init.weights_path);
                if (!(store.config == init.config)) {
                    reject(400, "weight file config does not match init config");
                    return;
                }
                loaded = slice_block_range(store, init.block_start, init.block_end);
            } else {
                loaded = parse_chunk(*init.inline_chunk);
                if (loaded.role != NodeRole::secondary ||
                    loaded.block_start != init.block_start ||
                    loaded.block_end != init.block_end || !(loaded.config == init.config)) {
                    reject(400, "inline chunk does not match the requested block range");
                    return;
                }
            }
        } catch (const std::exception& e) {
            reject(400, std::string("cannot load weights: ") + e.what());
            return;
        }

        TcpStream next;
        try {
            next = connect_with_retry(init.next.host, init.next.data_port,
                                      opts.connect_deadline);
        } catch (const std::exception& e) {
            reject(503, std::string("cannot reach successor: ") + e.what());
            return;
        }

        {
            std::lock_guard<std::mutex> lk(mu);
            if (state != State::uninitialized) {
                reject(409, "already initialized");
                return;
            }
            chunk = std::move(loaded);
            caches = KVCacheSet(init.n_samples, chunk.n_blocks_owned());
            expected_step.assign(init.n_samples, 0);
            next_out = std::move(next);
            in_q = std::make_unique<BoundedQueue<ActivationFrame>>(2 * init.n_samples);
            out_q = std::make_unique<BoundedQueue<ActivationFrame>>(2 * init.n_samples);
            receiver = std::thread([this] { receiver_main(); });
            processor = std::thread([this] { processor_main(); });
            sender = std::thread([this] { sender_main(); });
            state = State::ready;
        }
        cv.notify_all();
        res.set_content(json{{"status", "ready"},
                             {"blocks", {init.block_start, init.block_end}}}
                            .dump(),
                        "application/json");
    }

    void handle_health(httplib::Response& res) const {
        json j;
        {
            std::lock_guard<std::mutex> lk(mu);
            j["status"] = state_name();
            j["role"] = "secondary";
            if (state != State::uninitialized) {
                j["blocks"] = {chunk.block_start, chunk.block_end};
            }
            if (!fail_reason.empty()) j["detail"] = fail_reason;
        }
        j["frames_processed"] = frames_processed.load();
        res.set_content(j.dump(), "application/json");
    }

    void handle_stop(httplib::Response& res) {
        std::unique_lock<std::mutex> lk(mu);
        stop_acked = true;
        if (state == State::uninitialized) {
            state = State::stopped;
            cv.notify_all();
            res.set_content(json{{"status", "stopped"}, {"detail", "never initialized"}}.dump(),
                            "application/json");
            return;
        }
        // Normal path: the data-plane stop frame has already drained the
        // pipeline (or will momentarily); give it the drain window.
        const bool drained = cv.wait_for(lk, opts.drain_deadline, [this] {
            return state == State::stopped || state == State::failed;
        });
        if (!drained) {
            lk.unlock();
            fail_runtime("drain deadline expired during stop");
            lk.lock();
        }
        json j{{"status", state == State::failed ? "failed" : "stopped"}};
        if (!fail_reason.empty()) j["detail"] = fail_reason;
        lk.unlock();
        cv.notify_all();
        res.set_content(j.dump(), "application/json");
    }
};

SecondaryService::SecondaryService(SecondaryOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

SecondaryService::~SecondaryService() {
    try {
        shutdown();
    } catch (...) {
        // Destructor teardown is best-effort.
    }
}

void SecondaryService::start() {
    Impl& im = *impl_;
    im.data_listener = TcpListener::bind(im.opts.listen_host, im.opts.data_port);

    im.server.Put("/init", [&im](const httplib::Request& req, httplib::Response& res) {
        im.handle_init(req, res);
    });
    im.server.Get("/health", [&im](const httplib::Request&, httplib::Response& res) {
        im.handle_health(res);
    });
    im.server.Post("/stop", [&im](const httplib::Request&, httplib::Response& res) {
        im.handle_stop(res);
    });

    if (im.opts.control_port == 0) {
        const int port = im.server.bind_to_any_port(im.opts.listen_host);
        if (port <= 0) throw SetupError("cannot bind a control port");
        im.control_port = static_cast<std::uint16_t>(port);
    } else {
        if (!im.server.bind_to_port(im.opts.listen_host, im.opts.control_port)) {
            throw SetupError("cannot bind control port " +
                             std::to_string(im.opts.control_port));
        }
        im.control_port = im.opts.control_port;
    }
    im.server_thread = std::thread([&im] { im.server.listen_after_bind(); });
    im.server.wait_until_ready();
}

std::uint16_t SecondaryService::control_port() const { return impl_->control_port; }

std::uint16_t SecondaryService::data_port() const { return impl_->data_listener.port(); }

void SecondaryService::run_until_stopped() {
    Impl& im = *impl_;
    std::unique_lock<std::mutex> lk(im.mu);
    if (im.state == Impl::State::uninitialized) {
        const bool got_init = im.cv.wait_for(lk, im.opts.init_wait, [&im] {
            return im.state != Impl::State::uninitialized;
        });
        if (!got_init) {
            lk.unlock();
            throw SetupError("no init request within " +
                             std::to_string(im.opts.init_wait.count()) + " ms");
        }
    }
    im.cv.wait(lk, [&im] {
        return im.state == Impl::State::stopped || im.state == Impl::State::failed;
    });
    const bool failed = im.state == Impl::State::failed;
    const std::string reason = im.fail_reason;
    lk.unlock();

    im.join_runtime();
    if (failed) throw PipelineError(reason);
}

NodeStats SecondaryService::stats() const {
    std::lock_guard<std::mutex> lk(impl_->stats_mu);
    return impl_->stats;
}

HealthStatus SecondaryService::health_snapshot() const {
    Impl& im = *impl_;
    HealthStatus h;
    std::lock_guard<std::mutex> lk(im.mu);
    h.status = im.state_name();
    h.role = "secondary";
    if (im.state != Impl::State::uninitialized) {
        h.blocks = {static_cast<std::uint32_t>(im.chunk.block_start),
                    static_cast<std::uint32_t>(im.chunk.block_end)};
    }
    h.frames_processed = im.frames_processed.load();
    return h;
}

void SecondaryService::shutdown() {
    Impl& im = *impl_;
    {
        std::lock_guard<std::mutex> lk(im.mu);
        if (im.state == Impl::State::ready) {
            im.state = Impl::State::failed;
            im.fail_reason = "service shut down";
        } else if (im.state == Impl::State::uninitialized) {
            im.state = Impl::State::stopped;
        }
        im.prev_in.shutdown();
        im.next_out.shutdown();
        im.data_listener.shutdown();
    }
    if (im.in_q) im.in_q->fail("service shut down");
    if (im.out_q) im.out_q->fail("service shut down");
    im.cv.notify_all();
    im.join_runtime();
    im.server.stop();
    {
        std::lock_guard<std::mutex> lk(im.join_mu);
        if (im.server_thread.joinable()) im.server_thread.join();
    }
}

} // namespace ringlm
