// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "cascade/costmodel.hpp"
#include "helpers.hpp"

using namespace cascade;
using namespace cascade::costmodel;

namespace {

// Independent brute-force plan enumerator: walks non-decreasing sequences of
// shape indices (a different traversal than the production recursion) and
// collects canonical plans.
void oracle_walk(const std::vector<ReplicaShape>& shapes, int budget,
                 std::size_t from, std::vector<ReplicaShape>& current,
                 int used, std::set<std::vector<std::pair<int, int>>>& out) {
    if (!current.empty()) {
        auto plan = make_plan(current);
        std::vector<std::pair<int, int>> key;
        for (const auto& r : plan.replicas) key.emplace_back(r.tp, r.pp);
        out.insert(std::move(key));
    }
    for (std::size_t i = from; i < shapes.size(); ++i) {
        if (used + shapes[i].gpus() > budget) continue;
        current.push_back(shapes[i]);
        oracle_walk(shapes, budget, i, current, used + shapes[i].gpus(), out);
        current.pop_back();
    }
}

std::set<std::vector<std::pair<int, int>>> oracle_plans(
    int budget, const ModelSpec& model, const HardwareSpec& hw,
    const CostModelParams& params = {}) {
    std::vector<ReplicaShape> shapes;
    for (int tp = 1; tp <= hw.gpus_per_node; tp *= 2)
        for (int pp = 1; pp <= 8; ++pp)
            if (memory_feasible({tp, pp}, model, hw, params))
                shapes.push_back({tp, pp});
    std::set<std::vector<std::pair<int, int>>> out;
    std::vector<ReplicaShape> current;
    oracle_walk(shapes, budget, 0, current, 0, out);
    return out;
}

WorkloadStats workload(double rate, double in_mean, double out_mean) {
    WorkloadStats w;
    w.arrival_rate = rate;
    w.mean_input_tokens = in_mean;
    w.mean_output_tokens = out_mean;
    w.p95_input_tokens = in_mean * 3;
    w.p95_output_tokens = out_mean * 3;
    return w;
}

}  // namespace

TEST_CASE("memory_feasible: weights and KV headroom") {
    auto hw = testfix::cluster32();
    // 7B at 2 bytes/param: 14 GB weights fit a single 80 GB GPU.
    CHECK(memory_feasible({1, 1}, testfix::small7b(), hw));
    // 671B at 0.5 bytes/param: ~335 GB never fits one GPU.
    CHECK_FALSE(memory_feasible({1, 1}, testfix::large671b(), hw));
    // Degenerate zero-parameter model.
    ModelSpec empty;
    empty.id = "empty";
    empty.param_count = 0;
    empty.bytes_per_param = 2;
    empty.kv_bytes_per_token = 1024;
    CHECK(memory_feasible({1, 1}, empty, hw));
}

TEST_CASE("memory_feasible: KV requirement scales with sequence length") {
    auto hw = testfix::cluster32();
    auto m = testfix::small7b();
    // Post-weight memory on one GPU: 0.9 * (80 - 14) GB = 59.4 GB.
    const double kv_budget_tokens = 0.9 * (80e9 - 14e9) / m.kv_bytes_per_token;
    CHECK(memory_feasible({1, 1}, m, hw, {}, kv_budget_tokens * 0.99));
    CHECK_FALSE(memory_feasible({1, 1}, m, hw, {}, kv_budget_tokens * 1.01));
}

TEST_CASE("min_gpus_required") {
    auto hw = testfix::cluster32();
    CHECK(min_gpus_required(testfix::small7b(), hw) == 1);
    CHECK(min_gpus_required(testfix::mid70b(), hw) == 2);
    // 335.5 GB / 80 GB per GPU -> 5 GPUs.
    CHECK(min_gpus_required(testfix::large671b(), hw) == 5);

    ModelSpec monster = testfix::large671b();
    monster.bytes_per_param = 16;  // exceeds every tp*pp <= 64 shape
    CHECK_THROWS_AS(min_gpus_required(monster, hw), CascadeError);
}

TEST_CASE("enumerate_plans: single GPU budget has exactly one plan") {
    auto hw = testfix::cluster32();
    auto plans = enumerate_plans(1, testfix::small7b(), hw);
    REQUIRE(plans.size() == 1);
    CHECK(plans[0].replicas == std::vector<ReplicaShape>{{1, 1}});
    CHECK(plans[0].gpus_used == 1);
}

TEST_CASE("enumerate_plans: empty result signals infeasibility") {
    auto hw = testfix::cluster32();
    // 671B needs 5+ GPUs; a 4-GPU budget admits no plan at all.
    CHECK(enumerate_plans(4, testfix::large671b(), hw).empty());
    CHECK_THROWS_AS(enumerate_plans(0, testfix::small7b(), hw), CascadeError);
}

TEST_CASE("stage_p95_latency: saturating load is infeasible") {
    HardwareSpec hw = testfix::cluster32();
    hw.gpu_count = 1;
    hw.gpus_per_node = 1;
    auto w = workload(1000.0, 300, 120);  // far above one replica's capacity
    CHECK_FALSE(stage_p95_latency(1, testfix::small7b(), w, hw).feasible());
}

TEST_CASE("enumerate_plans: f=8 mid model contains DP=2 TP=4") {
    auto hw = testfix::cluster32();
    auto plans = enumerate_plans(8, testfix::mid70b(), hw);
    auto target = make_plan({{4, 1}, {4, 1}});
    CHECK(std::find(plans.begin(), plans.end(), target) != plans.end());
}

TEST_CASE("enumerate_plans matches the brute-force oracle at f=4") {
    auto hw = testfix::cluster32();
    hw.gpus_per_node = 4;  // tp in {1,2,4}
    auto model = testfix::small7b();
    auto expected = oracle_plans(4, model, hw);
    auto plans = enumerate_plans(4, model, hw);
    CHECK(plans.size() == expected.size());
    for (const auto& p : plans) {
        std::vector<std::pair<int, int>> key;
        for (const auto& r : p.replicas) key.emplace_back(r.tp, r.pp);
        CHECK(expected.count(key) == 1);
    }
    // Deduplicated under canonical form.
    for (std::size_t i = 1; i < plans.size(); ++i)
        CHECK(!(plans[i] == plans[i - 1]));
}

TEST_CASE("enumerate_plans oracle equality on larger budgets") {
    auto hw = testfix::cluster32();
    for (int budget : {6, 10}) {
        auto expected = oracle_plans(budget, testfix::mid70b(), hw);
        auto plans = enumerate_plans(budget, testfix::mid70b(), hw);
        CHECK(plans.size() == expected.size());
    }
}

TEST_CASE("service_time formulas") {
    auto hw = testfix::cluster32();
    auto model = testfix::small7b();
    CostModelParams params;
    params.comm_overhead_per_stage = 0.0;

    auto w = workload(1, 500, 100);
    auto st1 = service_time({1, 1}, model, w, hw, params);
    auto st2 = service_time({2, 1}, model, w, hw, params);
    CHECK(st2.decode_per_token_s ==
          doctest::Approx(st1.decode_per_token_s / 2).epsilon(1e-12));

    // pp = 1: bubble multiplier is exactly 1.
    CHECK(st1.prefill_s ==
          doctest::Approx(2.0 * model.param_count * w.mean_input_tokens /
                          (hw.flops_per_gpu * params.prefill_efficiency))
              .epsilon(1e-12));

    // Worked decode value: 14e9 bytes over 3.35e12 B/s at 0.7 efficiency.
    CHECK(st1.decode_per_token_s ==
          doctest::Approx(14e9 / (3.35e12 * 0.7)).epsilon(1e-12));
    CHECK(st1.decode_per_token_s == doctest::Approx(5.97e-3).epsilon(1e-2));

    // Infeasible shape is a caller bug.
    CHECK_THROWS_AS(
        service_time({1, 1}, testfix::large671b(), w, hw, params), CascadeError);
}

TEST_CASE("service_time: pipeline bubble applies to prefill") {
    auto hw = testfix::cluster32();
    auto model = testfix::mid70b();
    CostModelParams params;
    auto w = workload(1, 400, 100);
    auto pp1 = service_time({8, 1}, model, w, hw, params);
    auto pp2 = service_time({4, 2}, model, w, hw, params);
    // Same GPU count; pp=2 pays the bubble and extra comm on prefill.
    const double raw = 2.0 * model.param_count * w.mean_input_tokens /
                       (8 * hw.flops_per_gpu * params.prefill_efficiency);
    CHECK(pp2.prefill_s ==
          doctest::Approx((raw + 2 * params.comm_overhead_per_stage) * 1.1)
              .epsilon(1e-12));
    CHECK(pp1.prefill_s < pp2.prefill_s);
}

TEST_CASE("stage_p95_latency: empty workload and zero budget") {
    auto hw = testfix::cluster32();
    auto model = testfix::small7b();
    auto empty = workload(0, 100, 100);
    auto r0 = stage_p95_latency(0, model, empty, hw);
    CHECK(r0.latency_s == 0.0);
    CHECK(!r0.best_plan.has_value());

    auto busy = workload(1, 100, 100);
    CHECK_FALSE(stage_p95_latency(0, model, busy, hw).feasible());
}

TEST_CASE("stage_p95_latency: light traffic approaches the service time") {
    HardwareSpec hw = testfix::cluster32();
    hw.gpu_count = 1;
    hw.gpus_per_node = 1;
    auto model = testfix::small7b();
    CostModelParams params;
    params.comm_overhead_per_stage = 0.0;
    // Deterministic service: zero output tokens leaves only prefill.
    auto w = workload(0.01, 500, 0);
    auto st = service_time({1, 1}, model, w, hw, params);
    auto res = stage_p95_latency(1, model, w, hw, params);
    REQUIRE(res.feasible());
    CHECK(res.latency_s == doctest::Approx(st.prefill_s).epsilon(0.10));
    REQUIRE(res.best_plan.has_value());
    CHECK(res.best_plan->replicas == std::vector<ReplicaShape>{{1, 1}});
}

TEST_CASE("stage_p95_latency: monotone non-increasing in budget") {
    HardwareSpec hw = testfix::cluster32();
    hw.gpu_count = 8;
    hw.gpus_per_node = 4;
    auto model = testfix::small7b();
    util::Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        auto w = workload(rng.uniform(0.05, 1.5), rng.uniform(50, 800),
                          rng.uniform(10, 300));
        double prev = kInfeasible;
        bool seen = false;
        for (int f = 1; f <= 8; ++f) {
            auto res = stage_p95_latency(f, model, w, hw);
            if (res.feasible()) {
                if (seen) CHECK(res.latency_s <= prev);
                seen = true;
                prev = res.latency_s;
                REQUIRE(res.best_plan.has_value());
                CHECK(res.best_plan->gpus_used <= f);
            } else {
                CHECK(!seen);  // feasibility is upward-closed
            }
        }
    }
}

TEST_CASE("stage_p95_latency: deterministic and rate-monotone") {
    HardwareSpec hw = testfix::cluster32();
    hw.gpu_count = 4;
    hw.gpus_per_node = 4;
    auto model = testfix::small7b();
    auto w = workload(0.5, 300, 120);

    auto a = stage_p95_latency(4, model, w, hw);
    auto b = stage_p95_latency(4, model, w, hw);
    REQUIRE(a.feasible());
    CHECK(a.latency_s == b.latency_s);  // bit-identical
    CHECK(a.best_plan == b.best_plan);

    // Common random numbers: raising the arrival rate never lowers p95.
    double prev = 0.0;
    for (double rate : {0.1, 0.3, 0.6, 1.0, 1.4}) {
        auto w2 = workload(rate, 300, 120);
        auto res = stage_p95_latency(4, model, w2, hw);
        if (!res.feasible()) break;  // saturated; later rates only worse
        CHECK(res.latency_s >= prev);
        prev = res.latency_s;
    }
}

TEST_CASE("cost model params load from JSON with embedded defaults") {
    namespace fs = std::filesystem;
    fs::create_directories(testfix::temp_dir("costmodel"));
    const std::string path = testfix::temp_dir("costmodel") + "/params.json";
    {
        std::ofstream out(path);
        out << R"({"prefill_efficiency": 0.4, "queueing_sim_requests": 512})";
    }
    auto p = load_params(path);
    CHECK(p.prefill_efficiency == 0.4);
    CHECK(p.queueing_sim_requests == 512);
    CHECK(p.decode_bw_efficiency == 0.7);      // default
    CHECK(p.kv_memory_fraction == 0.9);        // default
    CHECK(p.pipeline_bubble_factor == 0.1);    // default

    {
        std::ofstream out(path);
        out << R"({"prefill_efficiency": 1.5})";
    }
    CHECK_THROWS_AS(load_params(path), CascadeError);
    CHECK_THROWS_AS(load_params("no_such_params.json"), CascadeError);
}

TEST_CASE("best_plan is contained in enumerate_plans") {
    HardwareSpec hw = testfix::cluster32();
    hw.gpu_count = 6;
    hw.gpus_per_node = 4;
    auto model = testfix::small7b();
    auto w = workload(0.8, 200, 80);
    for (int f = 1; f <= 6; ++f) {
        auto res = stage_p95_latency(f, model, w, hw);
        if (!res.feasible()) continue;
        auto plans = enumerate_plans(f, model, hw);
        CHECK(std::find(plans.begin(), plans.end(), *res.best_plan) != plans.end());
    }
}
