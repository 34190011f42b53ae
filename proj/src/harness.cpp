#include "ringlm/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "ringlm/error.hpp"

namespace ringlm {

double TokenTimeline::time_to_token(std::size_t count) const {
    if (count == 0 || count > records.size()) {
        throw ConfigError("timeline holds " + std::to_string(records.size()) +
                          " tokens, asked for token " + std::to_string(count));
    }
    return records[count - 1].elapsed_seconds;
}

double TokenTimeline::steady_tokens_per_second() const {
    if (records.size() <= n_warmup || n_warmup == 0) return 0.0;
    const double window_start = records[n_warmup - 1].elapsed_seconds;
    const double window_end = records.back().elapsed_seconds;
    const double span = window_end - window_start;
    if (span <= 0.0) return 0.0;
    return static_cast<double>(records.size() - n_warmup) / span;
}

double TokenTimeline::steady_interval_seconds() const {
    const double rate = steady_tokens_per_second();
    return rate > 0.0 ? 1.0 / rate : 0.0;
}

namespace {

// Weight file that cleans up after itself (used when a chunk is too big to
// ship inline through the control plane).
struct ScratchWeightFile {
    std::filesystem::path path;

    explicit ScratchWeightFile(const WeightStore& store) {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("ringlm-weights-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)) + ".bin");
        save_weights(store, path);
    }
    ~ScratchWeightFile() {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
};

NodeHooks hooks_for_node(const LocalRunConfig& config, std::size_t node) {
    NodeHooks hooks;
    hooks.stage_delay = config.stage_delay;
    if (config.on_frame_sent) {
        auto cb = config.on_frame_sent;
        hooks.on_frame_sent = [cb, node](const ActivationFrame& f) { cb(node, f); };
    }
    if (config.on_frame_processed) {
        auto cb = config.on_frame_processed;
        hooks.on_frame_processed = [cb, node](const ActivationFrame& f) { cb(node, f); };
    }
    return hooks;
}

} // namespace

LocalRunOutcome run_local(const LocalRunConfig& config) {
    if (config.store == nullptr) throw ConfigError("run_local needs a weight store");
    const ModelConfig& mc = config.store->config;
    config.job.validate(mc);
    if (config.n_nodes < 1) throw ConfigError("need at least one node");

    const PartitionPlan plan = make_partition_plan(mc, config.n_nodes, config.block_counts);
    const std::size_t S = config.job.n_samples();

    LocalRunOutcome out;
    out.plan = plan;
    out.timeline.n_warmup = S;

    if (config.n_nodes == 1) {
        StarterOptions options;
        options.setup_deadline = config.setup_deadline;
        options.hooks = hooks_for_node(config, 0);
        StarterNode starter(slice_chunk(*config.store, plan, 0), options);
        starter.setup_self_loop();
        StarterOutcome so = starter.run(config.job);
        out.result = std::move(so.result);
        out.timeline.records = std::move(so.timeline);
        out.node_stats = {so.stats};
        return out;
    }

    // Real control plane and TCP data plane, all on loopback.
    const std::size_t P = config.n_nodes;
    std::vector<std::unique_ptr<SecondaryService>> services;
    for (std::size_t i = 1; i < P; ++i) {
        SecondaryOptions options;
        options.listen_host = "127.0.0.1";
        options.hooks = hooks_for_node(config, i);
        services.push_back(std::make_unique<SecondaryService>(options));
        services.back()->start();
    }

    StarterOptions options;
    options.setup_deadline = config.setup_deadline;
    options.hooks = hooks_for_node(config, 0);
    StarterNode starter(slice_chunk(*config.store, plan, 0), options);
    const std::uint16_t starter_data = starter.bind_data("127.0.0.1", 0);

    NodeTopology topology;
    topology.nodes.resize(P);
    // The starter drives the control plane and never serves it; its control
    // slot just has to be a non-zero placeholder for topology validation.
    topology.nodes[0] = NodeEndpoint{"127.0.0.1", starter_data, starter_data};
    for (std::size_t i = 1; i < P; ++i) {
        topology.nodes[i] = NodeEndpoint{"127.0.0.1", services[i - 1]->data_port(),
                                         services[i - 1]->control_port()};
    }

    WeightSourceSpec weights;
    std::unique_ptr<ScratchWeightFile> scratch;
    const std::uint64_t store_bytes = 4 * parameter_count(mc);
    if (store_bytes <= config.inline_chunk_limit) {
        weights.store = config.store;
    } else {
        scratch = std::make_unique<ScratchWeightFile>(*config.store);
        weights.path = scratch->path.string();
    }

    starter.setup_ring(topology, plan, weights, S);

    std::vector<std::string> node_failures(P);
    std::vector<std::thread> waiters;
    for (std::size_t i = 1; i < P; ++i) {
        waiters.emplace_back([&services, &node_failures, i] {
            try {
                services[i - 1]->run_until_stopped();
            } catch (const std::exception& e) {
                node_failures[i] = e.what();
            }
        });
    }

    StarterOutcome so = starter.run(config.job);
    for (std::thread& t : waiters) t.join();

    out.result = std::move(so.result);
    out.timeline.records = std::move(so.timeline);
    out.node_stats.push_back(so.stats);
    for (std::size_t i = 1; i < P; ++i) {
        out.node_stats.push_back(services[i - 1]->stats());
        if (!node_failures[i].empty()) {
            std::string note = "node " + std::to_string(i) + ": " + node_failures[i];
            out.result.error = out.result.error ? *out.result.error + "; " + note : note;
        }
    }
    for (auto& service : services) service->shutdown();
    return out;
}

std::string VerifyReport::summary() const {
    std::ostringstream os;
    if (identical) {
        os << "identical: " << tokens_checked << " tokens match, max final-logit deviation "
           << max_logit_deviation;
    } else if (first_divergence) {
        os << "diverged: sample " << first_divergence->first << " differs first at position "
           << first_divergence->second << " (" << tokens_checked << " tokens compared)";
    } else {
        os << "diverged: token streams match but final logits deviate by "
           << max_logit_deviation;
    }
    return os.str();
}

VerifyReport run_verify(const WeightStore& store, const GenerationJob& job,
                        std::size_t n_nodes,
                        const std::optional<std::vector<std::size_t>>& block_counts) {
    const GenerationResult oracle = generate_reference(store, job);

    LocalRunConfig cfg;
    cfg.store = &store;
    cfg.n_nodes = n_nodes;
    cfg.block_counts = block_counts;
    cfg.job = job;
    const LocalRunOutcome distributed = run_local(cfg);
    if (distributed.result.error) {
        throw PipelineError("distributed run aborted: " + *distributed.result.error);
    }

    VerifyReport report;
    report.identical = true;
    for (std::size_t n = 0; n < oracle.tokens.size(); ++n) {
        const auto& a = oracle.tokens[n];
        const auto& b = distributed.result.tokens[n];
        const std::size_t len = std::min(a.size(), b.size());
        for (std::size_t i = 0; i < len; ++i) {
            ++report.tokens_checked;
            if (a[i] != b[i]) {
                report.identical = false;
                if (!report.first_divergence) report.first_divergence = {n, i};
                break;
            }
        }
        if (a.size() != b.size()) {
            report.identical = false;
            if (!report.first_divergence) report.first_divergence = {n, len};
        }
        if (n < oracle.final_logits.size() && n < distributed.result.final_logits.size() &&
            oracle.final_logits[n].size() == distributed.result.final_logits[n].size()) {
            for (std::size_t i = 0; i < oracle.final_logits[n].size(); ++i) {
                const double dev = std::abs(static_cast<double>(oracle.final_logits[n][i]) -
                                            distributed.result.final_logits[n][i]);
                report.max_logit_deviation = std::max(report.max_logit_deviation, dev);
            }
        }
    }
    if (report.max_logit_deviation != 0.0) report.identical = false;
    return report;
}

void write_bench_csv(const std::filesystem::path& path, const TokenTimeline& timeline,
                     std::size_t node_count) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out << "token_index,elapsed_seconds,sample_id,node_count\n";
    char line[128];
    for (const TokenRecord& r : timeline.records) {
        std::snprintf(line, sizeof(line), "%zu,%.9f,%u,%zu\n", r.global_index,
                      r.elapsed_seconds, r.sample_id, node_count);
        out << line;
    }
    if (!out) throw ConfigError("short write to " + path.string());
}

} // namespace ringlm
