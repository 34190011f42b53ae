#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ringlm/config.hpp"
#include "ringlm/error.hpp"
#include "ringlm/harness.hpp"
#include "ringlm/tokenizer.hpp"
#include "ringlm/weights.hpp"

using namespace ringlm;
using namespace std::chrono_literals;

namespace {

GenerationJob make_job(std::size_t n_samples, std::size_t n_tokens, std::uint64_t seed = 5) {
    GenerationJob job;
    const char* texts[3] = {"alpha", "be", "gamma ray"};
    for (std::size_t i = 0; i < n_samples; ++i) job.prompts.push_back(tokenize(texts[i % 3]));
    job.n_tokens = n_tokens;
    job.seed = seed;
    return job;
}

// Shrunk stand-ins that keep the presets' block counts and head grouping but
// fit a desk-scale test budget.
ModelConfig nanollama_shaped() {
    ModelConfig cfg;
    cfg.vocab_size = 384;
    cfg.n_blocks = 12;
    cfg.d_model = 64;
    cfg.n_heads = 16;
    cfg.n_kv_heads = 4;
    cfg.d_head = 4;
    cfg.context_len = 64;
    cfg.d_ffn = 96;
    cfg.validate();
    return cfg;
}

ModelConfig tinyllama_shaped() {
    ModelConfig cfg;
    cfg.vocab_size = 384;
    cfg.n_blocks = 22;
    cfg.d_model = 128;
    cfg.n_heads = 32;
    cfg.n_kv_heads = 4;
    cfg.d_head = 4;
    cfg.context_len = 64;
    cfg.d_ffn = 160;
    cfg.validate();
    return cfg;
}

} // namespace

TEST_CASE("distributed rings of every size match the reference on every sample count") {
    const WeightStore store = init_random_weights(toy_config(), 42);
    for (std::size_t nodes = 1; nodes <= 3; ++nodes) {
        for (std::size_t samples = 1; samples <= 3; ++samples) {
            const GenerationJob job = make_job(samples, 12);
            const VerifyReport report = run_verify(store, job, nodes);
            INFO("nodes=", nodes, " samples=", samples, ": ", report.summary());
            CHECK(report.identical);
            CHECK(report.max_logit_deviation == 0.0);
            CHECK(report.tokens_checked == samples * 12);
        }
    }
}

TEST_CASE("preset-shaped models distribute identically, including reference splits") {
    {
        const WeightStore store = init_random_weights(nanollama_shaped(), 7);
        const GenerationJob job = make_job(2, 10);
        CHECK(run_verify(store, job, 3).identical);
        CHECK(run_verify(store, job, 2, std::vector<std::size_t>{5, 7}).identical);
        CHECK(run_verify(store, job, 3, std::vector<std::size_t>{2, 5, 5}).identical);
    }
    {
        const WeightStore store = init_random_weights(tinyllama_shaped(), 8);
        const GenerationJob job = make_job(2, 8);
        CHECK(run_verify(store, job, 2, std::vector<std::size_t>{10, 12}).identical);
        CHECK(run_verify(store, job, 3, std::vector<std::size_t>{6, 8, 8}).identical);
    }
}

TEST_CASE("a ring larger than the block count leaves the starter computeless") {
    const WeightStore store = init_random_weights(toy_config(), 3);
    const GenerationJob job = make_job(2, 8);
    // toy has 4 blocks; 5 nodes means the starter owns none of them.
    const VerifyReport report = run_verify(store, job, 5);
    INFO(report.summary());
    CHECK(report.identical);
}

TEST_CASE("temperature decoding is identical across ring sizes") {
    const WeightStore store = init_random_weights(toy_config(), 21);
    GenerationJob job = make_job(3, 12);
    job.decode = DecodeStrategy::with_temperature(0.9f, 12);
    job.seed = 99;

    LocalRunConfig cfg;
    cfg.store = &store;
    cfg.job = job;
    cfg.n_nodes = 1;
    const LocalRunOutcome one = run_local(cfg);
    cfg.n_nodes = 3;
    const LocalRunOutcome three = run_local(cfg);
    REQUIRE_FALSE(one.result.error.has_value());
    REQUIRE_FALSE(three.result.error.has_value());
    CHECK(one.result.tokens == three.result.tokens);
    CHECK(one.result.final_logits == three.result.final_logits);
}

TEST_CASE("node statistics account for every frame") {
    const WeightStore store = init_random_weights(toy_config(), 11);
    const GenerationJob job = make_job(3, 10);

    LocalRunConfig cfg;
    cfg.store = &store;
    cfg.job = job;
    cfg.n_nodes = 3;
    const LocalRunOutcome out = run_local(cfg);
    REQUIRE_FALSE(out.result.error.has_value());

    std::size_t total_generated = 0;
    for (std::size_t n = 0; n < job.prompts.size(); ++n)
        total_generated += job.n_tokens - job.prompts[n].size();

    REQUIRE(out.node_stats.size() == 3);
    CHECK(out.timeline.size() == total_generated);
    CHECK(out.node_stats[0].frames_processed == total_generated + job.n_samples());
    CHECK(out.node_stats[1].frames_processed == total_generated);
    CHECK(out.node_stats[2].frames_processed == total_generated);
    CHECK(out.plan.block_counts == std::vector<std::size_t>{1, 1, 2});
}

TEST_CASE("frame hooks observe traffic from every node") {
    const WeightStore store = init_random_weights(toy_config(), 12);
    const GenerationJob job = make_job(2, 8);

    std::vector<std::size_t> sent_by_node(3, 0);
    LocalRunConfig cfg;
    cfg.store = &store;
    cfg.job = job;
    cfg.n_nodes = 3;
    std::mutex mu;
    cfg.on_frame_sent = [&](std::size_t node, const ActivationFrame&) {
        std::lock_guard lock(mu);
        sent_by_node.at(node)++;
    };
    const LocalRunOutcome out = run_local(cfg);
    REQUIRE_FALSE(out.result.error.has_value());
    for (std::size_t n = 0; n < 3; ++n) CHECK(sent_by_node[n] > 0);
}

TEST_CASE("timeline arithmetic on synthetic records") {
    TokenTimeline t;
    t.n_warmup = 2;
    // Warmup: tokens at 0.5 s and 0.6 s. Steady: one token every 0.1 s.
    t.records = {{0.5, 0, 0}, {0.6, 1, 1}, {0.7, 0, 2}, {0.8, 1, 3}, {0.9, 0, 4}};
    CHECK(t.size() == 5);
    CHECK(t.time_to_token(1) == 0.5);
    CHECK(t.time_to_token(2) == 0.6);
    CHECK(t.time_to_token(5) == 0.9);
    // Steady window: from record 2 (0.6 s) to record 5 (0.9 s), 3 tokens.
    CHECK(t.steady_tokens_per_second() == doctest::Approx(10.0));
    CHECK(t.steady_interval_seconds() == doctest::Approx(0.1));
}

TEST_CASE("bench CSV holds one row per generated token") {
    const WeightStore store = init_random_weights(toy_config(), 13);
    const GenerationJob job = make_job(2, 9);

    LocalRunConfig cfg;
    cfg.store = &store;
    cfg.job = job;
    cfg.n_nodes = 2;
    const LocalRunOutcome out = run_local(cfg);
    REQUIRE_FALSE(out.result.error.has_value());

    const std::filesystem::path path =
        std::filesystem::temp_directory_path() /
        ("ringlm_bench_" + std::to_string(::getpid()) + ".csv");
    write_bench_csv(path, out.timeline, 2);

    std::ifstream in(path);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header == "token_index,elapsed_seconds,sample_id,node_count");
    std::size_t rows = 0;
    std::string line;
    double prev_elapsed = -1.0;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tok_idx, elapsed, sample, nodes;
        REQUIRE(std::getline(ss, tok_idx, ','));
        REQUIRE(std::getline(ss, elapsed, ','));
        REQUIRE(std::getline(ss, sample, ','));
        REQUIRE(std::getline(ss, nodes, ','));
        CHECK(std::stoul(tok_idx) == rows);
        CHECK(std::stod(elapsed) >= prev_elapsed);
        prev_elapsed = std::stod(elapsed);
        CHECK(std::stoul(nodes) == 2);
        ++rows;
    }
    CHECK(rows == out.timeline.size());
    std::filesystem::remove(path);
}

TEST_CASE("weight files work as the distribution channel") {
    // Force the file path (not inline chunks) by dropping the inline limit.
    const WeightStore store = init_random_weights(toy_config(), 14);
    const GenerationJob job = make_job(2, 8);

    LocalRunConfig cfg;
    cfg.store = &store;
    cfg.job = job;
    cfg.n_nodes = 3;
    cfg.inline_chunk_limit = 0;
    const LocalRunOutcome out = run_local(cfg);
    REQUIRE_FALSE(out.result.error.has_value());

    const GenerationResult want = generate_reference(store, job);
    CHECK(out.result.tokens == want.tokens);
}

TEST_CASE("verification reports divergence details when streams differ") {
    const WeightStore store = init_random_weights(toy_config(), 15);
    const GenerationJob job = make_job(1, 6);
    const VerifyReport report = run_verify(store, job, 2);
    CHECK(report.identical);
    CHECK(report.summary().find("identical") != std::string::npos);
    CHECK_FALSE(report.first_divergence.has_value());
}
