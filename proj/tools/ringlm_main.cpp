// ringlm: ring-distributed decoder-only transformer inference.
//
// Subcommands: run-starter, run-secondary, run-local, bench, verify,
// make-weights. Exit codes: 0 success, 2 configuration error, 3 setup
// timeout/failure, 4 runtime abort, 5 verification mismatch.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ringlm/error.hpp"
#include "ringlm/harness.hpp"
#include "ringlm/tokenizer.hpp"

namespace {

using namespace ringlm;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSetup = 3;
constexpr int kExitRuntime = 4;
constexpr int kExitMismatch = 5;

struct ModelFlags {
    std::string preset;
    std::optional<std::uint32_t> vocab, blocks, dim, heads, kv_heads, head_dim, context, ffn;

    ModelConfig resolve() const {
        ModelConfig config = toy_config();
        if (!preset.empty()) {
            const auto p = preset_config(preset);
            if (!p) throw ConfigError("unknown preset '" + preset + "'");
            config = *p;
        }
        if (vocab) config.vocab_size = *vocab;
        if (blocks) config.n_blocks = *blocks;
        if (dim) config.d_model = *dim;
        if (heads) config.n_heads = *heads;
        if (kv_heads) config.n_kv_heads = *kv_heads;
        if (head_dim) config.d_head = *head_dim;
        if (context) config.context_len = *context;
        if (ffn) config.d_ffn = *ffn;
        // Derived defaults for hand-rolled configs.
        if (dim && !head_dim) config.d_head = config.d_model / std::max(1u, config.n_heads);
        if (dim && !ffn && preset.empty()) config.d_ffn = 4 * config.d_model;
        config.validate();
        return config;
    }

    bool any_set() const {
        return !preset.empty() || vocab || blocks || dim || heads || kv_heads || head_dim ||
               context || ffn;
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "Model preset: toy, nanollama, tinyllama")
            ->check(CLI::IsMember({"toy", "nanollama", "tinyllama"}));
        cmd->add_option("--model-vocab", vocab, "Vocabulary size");
        cmd->add_option("--model-blocks", blocks, "Number of transformer blocks");
        cmd->add_option("--model-dim", dim, "Embedding dimension");
        cmd->add_option("--model-heads", heads, "Attention heads");
        cmd->add_option("--model-kv-heads", kv_heads, "Key/value heads");
        cmd->add_option("--model-head-dim", head_dim, "Per-head dimension");
        cmd->add_option("--model-context", context, "Context length");
        cmd->add_option("--model-ffn", ffn, "MLP hidden width");
    }
};

struct WeightFlags {
    std::string weights_path;
    std::optional<std::uint64_t> random_seed;

    WeightStore resolve(const ModelConfig& config, bool model_explicitly_set) const {
        if (!weights_path.empty() && random_seed) {
            throw ConfigError("--weights and --random-seed are mutually exclusive");
        }
        if (!weights_path.empty()) {
            WeightStore store = load_weights(weights_path);
            if (model_explicitly_set && !(store.config == config)) {
                throw ConfigError("weight file " + weights_path +
                                  " does not match the requested model configuration");
            }
            return store;
        }
        // Default: deterministic random weights, seed 42.
        return init_random_weights(config, random_seed.value_or(42));
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--weights", weights_path, "Load weights from this file");
        cmd->add_option("--random-seed", random_seed,
                        "Generate random weights from this seed (default 42)");
    }
};

struct JobFlags {
    std::size_t samples = 1;
    std::size_t tokens = 32;
    std::uint64_t seed = 0;
    bool greedy = false;
    std::optional<float> temperature;
    std::uint32_t top_k = 0;
    std::vector<std::string> prompts;

    GenerationJob resolve() const {
        if (samples == 0) throw ConfigError("--samples must be positive");
        if (greedy && temperature) {
            throw ConfigError("--greedy and --temp are mutually exclusive");
        }
        if (temperature && !(*temperature > 0.0f)) {
            throw ConfigError("--temp must be positive");
        }
        GenerationJob job;
        job.n_tokens = tokens;
        job.seed = seed;
        job.decode = temperature ? DecodeStrategy::with_temperature(*temperature, top_k)
                                 : DecodeStrategy::greedy();
        std::vector<std::string> texts = prompts;
        if (texts.empty()) texts.push_back("\n");
        for (std::size_t n = 0; n < samples; ++n) {
            job.prompts.push_back(tokenize(texts[n % texts.size()]));
        }
        return job;
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--samples", samples, "Concurrent samples S")->capture_default_str();
        cmd->add_option("--tokens", tokens, "Total tokens per sample T (prompt included)")
            ->capture_default_str();
        cmd->add_option("--seed", seed, "Sampling seed")->capture_default_str();
        cmd->add_flag("--greedy", greedy, "Greedy decoding (default)");
        cmd->add_option("--temp", temperature, "Temperature decoding with this temperature");
        cmd->add_option("--top-k", top_k, "Restrict temperature sampling to the top K logits");
        cmd->add_option("--prompt", prompts,
                        "Prompt text (repeatable; samples cycle through them; default \"\\n\")");
    }
};

std::optional<std::vector<std::size_t>> to_optional_blocks(const std::vector<std::size_t>& v) {
    if (v.empty()) return std::nullopt;
    return v;
}

NodeTopology parse_topology(const std::vector<std::string>& entries) {
    NodeTopology topology;
    for (const std::string& entry : entries) {
        const auto first = entry.find(':');
        const auto second = entry.find(':', first + 1);
        if (first == std::string::npos || second == std::string::npos) {
            throw ConfigError("topology entry '" + entry + "' is not host:data_port:control_port");
        }
        NodeEndpoint e;
        e.host = entry.substr(0, first);
        try {
            e.data_port = static_cast<std::uint16_t>(
                std::stoul(entry.substr(first + 1, second - first - 1)));
            e.control_port = static_cast<std::uint16_t>(std::stoul(entry.substr(second + 1)));
        } catch (const std::exception&) {
            throw ConfigError("topology entry '" + entry + "' has a malformed port");
        }
        topology.nodes.push_back(std::move(e));
    }
    // Not validated here: node 0 may legitimately carry port 0 until the
    // starter binds and substitutes the real port.
    return topology;
}

void print_texts(const GenerationResult& result, std::uint32_t vocab_size) {
    for (std::size_t n = 0; n < result.tokens.size(); ++n) {
        std::cout << "--- sample " << n << " (" << result.tokens[n].size() << " tokens) ---\n";
        std::cout << detokenize(result.tokens[n], vocab_size) << "\n";
    }
}

void print_timeline_summary(const TokenTimeline& timeline, const std::vector<NodeStats>& stats) {
    if (!timeline.records.empty()) {
        std::cout << "generated " << timeline.records.size() << " tokens in "
                  << timeline.records.back().elapsed_seconds << " s";
        const double rate = timeline.steady_tokens_per_second();
        if (rate > 0.0) std::cout << " (steady " << rate << " tok/s)";
        std::cout << "\n";
    }
    for (std::size_t i = 0; i < stats.size(); ++i) {
        std::cout << "node " << i << ": " << stats[i].frames_processed
                  << " frames processed, utilization " << stats[i].utilization() << "\n";
    }
}

int run_local_family(const ModelFlags& model, const WeightFlags& weights, const JobFlags& jobf,
                     std::size_t nodes, const std::vector<std::size_t>& blocks,
                     std::size_t delay_ms, const std::string& csv_path, bool bench_mode) {
    const ModelConfig config = model.resolve();
    const WeightStore store = weights.resolve(config, model.any_set());
    GenerationJob job = jobf.resolve();
    job.validate(store.config);

    LocalRunConfig lc;
    lc.store = &store;
    lc.n_nodes = nodes;
    lc.block_counts = to_optional_blocks(blocks);
    lc.job = job;
    lc.stage_delay = std::chrono::milliseconds(delay_ms);

    const LocalRunOutcome out = run_local(lc);
    if (out.result.error) {
        std::cerr << "error: " << *out.result.error << "\n";
        print_texts(out.result, store.config.vocab_size);
        return kExitRuntime;
    }

    print_texts(out.result, store.config.vocab_size);
    print_timeline_summary(out.timeline, out.node_stats);

    if (!csv_path.empty()) {
        write_bench_csv(csv_path, out.timeline, nodes);
        std::cout << "wrote " << out.timeline.records.size() << " rows to " << csv_path << "\n";
    }
    if (bench_mode) {
        const MemoryEstimate est =
            estimate_memory(out.plan, store.config, job.n_samples(), store.config.context_len);
        for (std::size_t i = 0; i < est.per_node_bytes.size(); ++i) {
            std::cout << "node " << i << " estimated memory: "
                      << est.per_node_bytes[i] / (1024.0 * 1024.0) << " MiB ("
                      << out.plan.block_counts[i] << " blocks)\n";
        }
        std::cout << "total estimated memory: " << est.total_bytes / (1024.0 * 1024.0)
                  << " MiB\n";
    }
    return kExitOk;
}

int run_verify_cmd(const ModelFlags& model, const WeightFlags& weights, const JobFlags& jobf,
                   std::size_t nodes, const std::vector<std::size_t>& blocks) {
    const ModelConfig config = model.resolve();
    const WeightStore store = weights.resolve(config, model.any_set());
    GenerationJob job = jobf.resolve();
    job.validate(store.config);

    const VerifyReport report = run_verify(store, job, nodes, to_optional_blocks(blocks));
    std::cout << report.summary() << "\n";
    return report.identical ? kExitOk : kExitMismatch;
}

int run_starter_cmd(const ModelFlags& model, const WeightFlags& weights, const JobFlags& jobf,
                    const std::vector<std::string>& topology_entries,
                    const std::vector<std::size_t>& blocks, std::size_t delay_ms,
                    std::size_t setup_timeout_ms, const std::string& csv_path) {
    const ModelConfig config = model.resolve();
    const WeightStore store = weights.resolve(config, model.any_set());
    GenerationJob job = jobf.resolve();
    job.validate(store.config);

    NodeTopology topology = parse_topology(topology_entries);
    const PartitionPlan plan =
        make_partition_plan(store.config, topology.n_nodes(), to_optional_blocks(blocks));

    StarterOptions options;
    options.setup_deadline = std::chrono::milliseconds(setup_timeout_ms);
    options.hooks.stage_delay = std::chrono::milliseconds(delay_ms);

    StarterNode starter(slice_chunk(store, plan, 0), options);
    // Port 0 asks the OS for a port; the secondaries must learn the real one.
    topology.nodes[0].data_port =
        starter.bind_data(topology.nodes[0].host, topology.nodes[0].data_port);
    if (topology.nodes[0].control_port == 0) {
        // The starter runs no control server; topology validation just needs a
        // unique non-zero entry, so reuse its freshly bound data port.
        topology.nodes[0].control_port = topology.nodes[0].data_port;
    }
    topology.validate();

    WeightSourceSpec ws;
    if (!weights.weights_path.empty()) {
        ws.path = weights.weights_path; // secondaries read the shared file
    } else {
        ws.store = &store; // chunks ship inline over the control plane
    }
    starter.setup_ring(topology, plan, ws, job.n_samples());

    const StarterOutcome outcome = starter.run(job);
    if (outcome.result.error) {
        std::cerr << "error: " << *outcome.result.error << "\n";
        print_texts(outcome.result, store.config.vocab_size);
        return kExitRuntime;
    }
    print_texts(outcome.result, store.config.vocab_size);
    TokenTimeline timeline;
    timeline.records = outcome.timeline;
    timeline.n_warmup = job.n_samples();
    print_timeline_summary(timeline, {outcome.stats});
    if (!csv_path.empty()) {
        write_bench_csv(csv_path, timeline, topology.n_nodes());
        std::cout << "wrote " << timeline.records.size() << " rows to " << csv_path << "\n";
    }
    return kExitOk;
}

int run_secondary_cmd(const std::string& listen_host, std::uint16_t data_port,
                      std::uint16_t control_port, std::size_t delay_ms,
                      std::size_t setup_timeout_ms) {
    SecondaryOptions options;
    options.listen_host = listen_host;
    options.data_port = data_port;
    options.control_port = control_port;
    options.init_wait = std::chrono::milliseconds(setup_timeout_ms);
    options.hooks.stage_delay = std::chrono::milliseconds(delay_ms);

    SecondaryService service(options);
    service.start();
    std::cout << "secondary listening on " << listen_host << " data=" << service.data_port()
              << " control=" << service.control_port() << std::endl;
    service.run_until_stopped();
    // The starter confirms the stop over the control plane shortly after the
    // data-plane stop frame returns to it; keep the control server up long
    // enough to acknowledge instead of racing it with process exit.
    std::this_thread::sleep_for(std::chrono::milliseconds(250));
    const HealthStatus health = service.health_snapshot();
    std::cout << "secondary stopped after " << health.frames_processed << " frames"
              << std::endl;
    service.shutdown();
    return kExitOk;
}

int run_make_weights(const ModelFlags& model, std::uint64_t seed, const std::string& out_path) {
    const ModelConfig config = model.resolve();
    const WeightStore store = init_random_weights(config, seed);
    save_weights(store, out_path);
    std::cout << "wrote " << parameter_count(config) << " parameters to " << out_path << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ring-distributed transformer inference"};
    app.require_subcommand(1);

    ModelFlags model;
    WeightFlags weights;
    JobFlags job;
    std::size_t nodes = 1;
    std::vector<std::size_t> blocks;
    std::size_t delay_ms = 0;
    std::size_t setup_timeout_ms = 10000;
    std::string csv_path;
    std::vector<std::string> topology_entries;
    std::string listen_host = "127.0.0.1";
    std::uint16_t data_port = 0;
    std::uint16_t control_port = 0;
    std::uint64_t weight_seed = 42;
    std::string out_path;

    // Each subcommand reads its own flat-key config file: `tokens=8` in the
    // file means the same as `--tokens 8` on the command line. The file is fed
    // through the parser after the command line, and CLI11 skips options that
    // already hold a value, so explicit flags win over file values.
    std::string config_path;
    auto add_config_flag = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path,
                        "Read options from a config file (flags override it)")
            ->check(CLI::ExistingFile);
        cmd->allow_config_extras(CLI::config_extras_mode::error);
    };

    auto add_ring_flags = [&](CLI::App* cmd) {
        cmd->add_option("--blocks", blocks, "Explicit per-node block counts, e.g. 5,7")
            ->delimiter(',');
        cmd->add_option("--delay-ms", delay_ms, "Injected per-stage processing delay");
        cmd->add_option("--setup-timeout-ms", setup_timeout_ms, "Control-plane setup deadline")
            ->capture_default_str();
    };

    CLI::App* local = app.add_subcommand("run-local",
                                         "Run a P-node loopback ring inside this process");
    add_config_flag(local);
    model.attach(local);
    weights.attach(local);
    job.attach(local);
    local->add_option("--nodes", nodes, "Ring size P")->capture_default_str();
    add_ring_flags(local);
    local->add_option("--csv", csv_path, "Write the per-token timeline to this CSV file");

    CLI::App* bench = app.add_subcommand("bench",
                                         "Loopback run that writes a per-token timing CSV "
                                         "and prints throughput and memory accounting");
    add_config_flag(bench);
    model.attach(bench);
    weights.attach(bench);
    job.attach(bench);
    bench->add_option("--nodes", nodes, "Ring size P")->capture_default_str();
    add_ring_flags(bench);
    bench->add_option("--csv", csv_path, "CSV output path")->required();

    CLI::App* verify = app.add_subcommand("verify",
                                          "Compare a P-node loopback run against the "
                                          "single-process oracle");
    add_config_flag(verify);
    model.attach(verify);
    weights.attach(verify);
    job.attach(verify);
    verify->add_option("--nodes", nodes, "Ring size P")->capture_default_str();
    verify->add_option("--blocks", blocks, "Explicit per-node block counts")->delimiter(',');

    CLI::App* starter = app.add_subcommand("run-starter",
                                           "Run the starter node of a multi-process ring");
    add_config_flag(starter);
    model.attach(starter);
    weights.attach(starter);
    job.attach(starter);
    starter
        ->add_option("--topology", topology_entries,
                     "All ring nodes in order, host:data_port:control_port "
                     "(node 0 is this starter)")
        ->delimiter(',')
        ->required();
    add_ring_flags(starter);
    starter->add_option("--csv", csv_path, "Write the per-token timeline to this CSV file");

    CLI::App* secondary = app.add_subcommand("run-secondary",
                                             "Run a secondary node until it is stopped");
    add_config_flag(secondary);
    secondary->add_option("--listen-host", listen_host, "Bind address")->capture_default_str();
    secondary->add_option("--data-port", data_port, "Data-plane port (0 = ephemeral)");
    secondary->add_option("--control-port", control_port, "Control-plane port (0 = ephemeral)");
    secondary->add_option("--delay-ms", delay_ms, "Injected per-stage processing delay");
    secondary
        ->add_option("--setup-timeout-ms", setup_timeout_ms,
                     "How long to wait for the starter's init request")
        ->capture_default_str();

    CLI::App* make = app.add_subcommand("make-weights",
                                        "Write a deterministic random weight file");
    add_config_flag(make);
    model.attach(make);
    make->add_option("--random-seed", weight_seed, "Weight RNG seed")->capture_default_str();
    make->add_option("--out", out_path, "Output path")->required();

    try {
        app.parse(argc, argv);
        if (!config_path.empty()) {
            std::ifstream file(config_path);
            if (!file) {
                std::cerr << "configuration error: cannot read " << config_path << "\n";
                return kExitConfig;
            }
            app.get_subcommands().front()->parse_from_stream(file);
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (local->parsed()) {
            return run_local_family(model, weights, job, nodes, blocks, delay_ms, csv_path,
                                    false);
        }
        if (bench->parsed()) {
            return run_local_family(model, weights, job, nodes, blocks, delay_ms, csv_path,
                                    true);
        }
        if (verify->parsed()) {
            return run_verify_cmd(model, weights, job, nodes, blocks);
        }
        if (starter->parsed()) {
            return run_starter_cmd(model, weights, job, topology_entries, blocks, delay_ms,
                                   setup_timeout_ms, csv_path);
        }
        if (secondary->parsed()) {
            return run_secondary_cmd(listen_host, data_port, control_port, delay_ms,
                                     setup_timeout_ms);
        }
        if (make->parsed()) {
            return run_make_weights(model, weight_seed, out_path);
        }
        std::cerr << "no subcommand selected\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PlanError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TokenError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SamplingError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const WeightIoError& e) {
        std::cerr << "weight file error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SetupError& e) {
        std::cerr << "setup failed: " << e.what() << "\n";
        return kExitSetup;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
