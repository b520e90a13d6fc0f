// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "cascade/domain.hpp"
#include "cascade/util.hpp"
#include "helpers.hpp"

using namespace cascade;

namespace {

util::Rng g_rng(20260811);

ReplicaShape random_shape(util::Rng& rng) {
    return {1 << rng.uniform_int(0, 3), rng.uniform_int(1, 8)};
}

ParallelismPlan random_plan(util::Rng& rng) {
    std::vector<ReplicaShape> replicas;
    const int n = rng.uniform_int(1, 6);
    for (int i = 0; i < n; ++i) replicas.push_back(random_shape(rng));
    return make_plan(std::move(replicas));
}

HardwareSpec random_hw(util::Rng& rng) {
    HardwareSpec hw;
    hw.gpu_count = rng.uniform_int(1, 128);
    hw.flops_per_gpu = rng.uniform(1e12, 2e15);
    hw.mem_bandwidth_per_gpu = rng.uniform(1e11, 5e12);
    hw.mem_capacity_per_gpu = rng.uniform(16e9, 192e9);
    hw.intra_node_bw = rng.uniform(1e10, 1e12);
    hw.inter_node_bw = rng.uniform(1e9, 5e11);
    hw.gpus_per_node = 1 << rng.uniform_int(0, 4);
    return hw;
}

ModelSpec random_model(util::Rng& rng) {
    ModelSpec m;
    m.id = "m" + std::to_string(rng.uniform_int(0, 999999));
    m.param_count = rng.uniform(1e8, 1e12);
    m.bytes_per_param = rng.uniform(0.5, 4.0);
    m.kv_bytes_per_token = rng.uniform(0, 1e6);
    m.min_gpus = rng.uniform_int(1, 16);
    m.stage_index = rng.uniform_int(1, 4);
    return m;
}

WorkloadStats random_workload(util::Rng& rng) {
    WorkloadStats w;
    w.arrival_rate = rng.uniform(0, 50);
    w.mean_input_tokens = rng.uniform(0, 2000);
    w.mean_output_tokens = rng.uniform(0, 2000);
    w.p95_input_tokens = w.mean_input_tokens + rng.uniform(0, 2000);
    w.p95_output_tokens = w.mean_output_tokens + rng.uniform(0, 2000);
    return w;
}

TraceRecord random_record(util::Rng& rng, int stages, double arrival) {
    TraceRecord r;
    r.arrival_s = arrival;
    r.input_tokens = std::round(rng.uniform(0, 4096));
    for (int s = 0; s < stages; ++s)
        r.per_stage.push_back(
            {std::round(rng.uniform(0, 4096)), rng.uniform(0, 100)});
    return r;
}

CascadePlan random_cascade_plan(util::Rng& rng) {
    CascadePlan p;
    const int c = rng.uniform_int(1, 4);
    double ratio = 1.0;
    for (int i = 0; i < c; ++i) {
        const bool deployed = i == 0 || rng.uniform() < 0.8;
        if (deployed) {
            p.allocations.push_back(rng.uniform_int(1, 16));
            p.plans.push_back(random_plan(rng));
            p.processing_ratios.push_back(ratio);
            ratio *= rng.uniform();
        } else {
            p.allocations.push_back(0);
            p.plans.emplace_back();
            p.processing_ratios.push_back(0.0);
            ratio = 0.0;
        }
    }
    for (int i = 0; i + 1 < c; ++i)
        p.thresholds.thresholds.push_back(rng.uniform(0, 101));
    p.predicted_max_p95_s = rng.uniform(0, 100);
    p.predicted_quality = rng.uniform(0, 100);
    return p;
}

template <typename T>
void check_roundtrip(const T& value) {
    nlohmann::json j = value;
    T back = j.get<T>();
    const bool roundtrips = back == value;
    CHECK(roundtrips);
}

// Reference plan shaped like a real three-stage deployment: allocations
// (4, 8, 20) with s1 = 4x(tp1), s2 = 2x(tp4), s3 = (tp4,pp3)+(tp8).
CascadePlan reference_plan() {
    CascadePlan plan;
    plan.allocations = {4, 8, 20};
    plan.plans = {
        make_plan({{1, 1}, {1, 1}, {1, 1}, {1, 1}}),
        make_plan({{4, 1}, {4, 1}}),
        make_plan({{4, 3}, {8, 1}}),
    };
    plan.thresholds.thresholds = {99, 91};
    plan.processing_ratios = {1.0, 0.94, 0.50};
    plan.predicted_max_p95_s = 1.0;
    plan.predicted_quality = 90.0;
    return plan;
}

}  // namespace

TEST_CASE("canonicalize sorts by tp*pp descending") {
    ParallelismPlan p;
    p.replicas = {{2, 1}, {4, 1}};
    auto c = canonicalize(p);
    CHECK(c.replicas == std::vector<ReplicaShape>{{4, 1}, {2, 1}});
    CHECK(c.gpus_used == 6);
}

TEST_CASE("canonicalize is idempotent") {
    ParallelismPlan p = make_plan({{4, 1}, {2, 1}, {1, 1}});
    CHECK(canonicalize(p) == p);
}

TEST_CASE("canonicalize breaks product ties by tp") {
    // (1,2) and (2,1) both use 2 GPUs; the higher-tp replica sorts first.
    ParallelismPlan p;
    p.replicas = {{1, 2}, {2, 1}};
    auto c = canonicalize(p);
    CHECK(c.replicas == std::vector<ReplicaShape>{{2, 1}, {1, 2}});
}

TEST_CASE("canonicalize is permutation-invariant") {
    std::mt19937 shuffle_rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        ParallelismPlan base = random_plan(g_rng);
        ParallelismPlan shuffled = base;
        std::shuffle(shuffled.replicas.begin(), shuffled.replicas.end(),
                     shuffle_rng);
        shuffled.gpus_used = 0;
        CHECK(canonicalize(shuffled) == base);
    }
}

TEST_CASE("serialization round-trips for every domain type") {
    for (int i = 0; i < 1000; ++i) {
        check_roundtrip(random_hw(g_rng));
        check_roundtrip(random_model(g_rng));
        check_roundtrip(random_workload(g_rng));
        check_roundtrip(random_shape(g_rng));
        check_roundtrip(random_plan(g_rng));
        RoutingThresholds h;
        for (int k = 0; k < 3; ++k) h.thresholds.push_back(g_rng.uniform(0, 101));
        check_roundtrip(h);
        check_roundtrip(random_record(g_rng, 3, g_rng.uniform(0, 1e5)));
        CascadePlan plan = random_cascade_plan(g_rng);
        check_roundtrip(plan);
        ObjectivePoint point;
        point.latency_s = g_rng.uniform(0, 10);
        point.quality = g_rng.uniform(0, 100);
        point.thresholds = plan.thresholds;
        point.plan_ref = plan;
        check_roundtrip(point);
    }
}

TEST_CASE("validate_plan accepts a realistic three-stage allocation") {
    auto hw = testfix::cluster32();
    auto models = testfix::cascade3();
    auto report = validate_plan(reference_plan(), hw, models);
    CHECK(report.empty());
}

TEST_CASE("validate_plan flags a budget shortfall") {
    auto hw = testfix::cluster32();
    auto models = testfix::cascade3();
    auto plan = reference_plan();
    plan.allocations = {4, 8, 19};  // sum = N - 1
    auto report = validate_plan(plan, hw, models);
    REQUIRE(!report.empty());
    bool has_budget = false;
    for (const auto& line : report)
        if (line.find("budget") != std::string::npos) has_budget = true;
    CHECK(has_budget);
}

TEST_CASE("validate_plan flags coupling, ratio and memory violations") {
    auto hw = testfix::cluster32();
    auto models = testfix::cascade3();

    auto coupling = reference_plan();
    coupling.plans[2] = std::nullopt;  // f_3 = 20 but no plan
    CHECK(!validate_plan(coupling, hw, models).empty());

    auto ratios = reference_plan();
    ratios.processing_ratios = {1.0, 0.5, 0.9};  // p_3 > p_2
    CHECK(!validate_plan(ratios, hw, models).empty());

    auto memory = reference_plan();
    // 671B on a single GPU replica cannot hold its weights.
    memory.plans[2] = make_plan({{1, 1}});
    memory.allocations = {4, 8, 20};
    auto report = validate_plan(memory, hw, models);
    bool has_memory = false;
    for (const auto& line : report)
        if (line.find("memory") != std::string::npos) has_memory = true;
    CHECK(has_memory);
}

TEST_CASE("trace jsonl round-trip and ordering enforcement") {
    namespace fs = std::filesystem;
    fs::create_directories(testfix::temp_dir("domain"));
    const std::string path = testfix::temp_dir("domain") + "/trace.jsonl";

    std::vector<TraceRecord> trace;
    double t = 0;
    for (int i = 0; i < 50; ++i) {
        t += g_rng.uniform(0, 2);
        trace.push_back(random_record(g_rng, 3, t));
    }
    write_trace_jsonl(path, trace);
    auto back = read_trace_jsonl(path);
    CHECK(back == trace);

    // Decreasing arrivals must be rejected.
    std::swap(trace.front().arrival_s, trace.back().arrival_s);
    write_trace_jsonl(path, trace);
    CHECK_THROWS_AS(read_trace_jsonl(path), CascadeError);
}

TEST_CASE("overall arrival rate estimator") {
    std::vector<TraceRecord> trace;
    for (int i = 0; i <= 10; ++i) {
        TraceRecord r;
        r.arrival_s = i * 0.5;  // 11 records over 5 s
        r.per_stage.push_back({10, 50});
        trace.push_back(r);
    }
    CHECK(overall_arrival_rate(trace) == doctest::Approx(11.0 / 5.0));
    CHECK(overall_arrival_rate({trace.front()}) == 0.0);
}
