// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "cascade/routing.hpp"
#include "helpers.hpp"

using namespace cascade;
using namespace cascade::routing;

namespace {

std::vector<TraceRecord> tiny_trace(const std::vector<std::vector<double>>& scores) {
    std::vector<TraceRecord> trace;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        TraceRecord r;
        r.arrival_s = static_cast<double>(i);
        r.input_tokens = 100;
        for (double s : scores[i]) r.per_stage.push_back({50, s});
        trace.push_back(r);
    }
    return trace;
}

/// Independent per-request counting oracle.
struct OracleResult {
    std::vector<double> ratios;
    double quality = 0;
};

OracleResult oracle_route(const std::vector<TraceRecord>& trace,
                          const std::vector<double>& h,
                          const std::vector<bool>& deployed) {
    const std::size_t c = deployed.size();
    std::vector<std::size_t> reached(c, 0);
    double q = 0;
    int last = -1;
    for (std::size_t i = 0; i < c; ++i)
        if (deployed[i]) last = static_cast<int>(i);
    for (const auto& rec : trace) {
        int accepted = -1;
        for (std::size_t i = 0; i < c && accepted < 0; ++i) {
            if (!deployed[i]) continue;
            ++reached[i];
            if (static_cast<int>(i) == last ||
                rec.per_stage[i].score >= h[i])
                accepted = static_cast<int>(i);
        }
        q += rec.per_stage[accepted].score;
    }
    OracleResult out;
    for (std::size_t i = 0; i < c; ++i)
        out.ratios.push_back(static_cast<double>(reached[i]) / trace.size());
    out.quality = q / static_cast<double>(trace.size());
    return out;
}

}  // namespace

TEST_CASE("all-accept thresholds stop every request at stage 1") {
    auto trace = tiny_trace({{90, 95, 99}, {10, 50, 80}, {70, 75, 85}});
    RoutingThresholds h{{0, 0}};
    auto out = route_trace(trace, h, {true, true, true});
    CHECK(out.ratios == std::vector<double>{1.0, 0.0, 0.0});
    CHECK(out.quality == doctest::Approx((90.0 + 10.0 + 70.0) / 3));
    for (int stage : out.per_request_accept_stage) CHECK(stage == 1);
}

TEST_CASE("sentinel thresholds escalate every request to the last stage") {
    auto trace = tiny_trace({{90, 95, 99}, {10, 50, 80}, {70, 75, 85}});
    RoutingThresholds h{{kThresholdSentinel, kThresholdSentinel}};
    auto out = route_trace(trace, h, {true, true, true});
    CHECK(out.ratios == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(out.quality == doctest::Approx((99.0 + 80.0 + 85.0) / 3));
    // Q at all-forward equals the mean final-stage score exactly.
    double final_mean = (99.0 + 80.0 + 85.0) / 3;
    CHECK(out.quality == final_mean);
}

TEST_CASE("escalation ratio counts scores below the threshold") {
    auto trace = tiny_trace({{95, 1}, {80, 1}, {99, 1}, {60, 1}});
    RoutingThresholds h{{90}};
    auto out = route_trace(trace, h, {true, true});
    CHECK(out.ratios[1] == 0.5);  // 80 and 60 forwarded
}

TEST_CASE("undeployed stages are skipped in the escalation chain") {
    auto trace = tiny_trace({{95, 50, 90}, {10, 50, 70}});
    RoutingThresholds h{{90, 0}};
    auto out = route_trace(trace, h, {true, false, true});
    CHECK(out.ratios == std::vector<double>{1.0, 0.0, 0.5});
    CHECK(out.per_request_accept_stage == std::vector<int>{1, 3});
    CHECK(out.quality == doctest::Approx((95.0 + 70.0) / 2));
    // Skipped stage keeps an empty workload.
    CHECK(out.stage_workloads[1].arrival_rate == 0.0);
}

TEST_CASE("stage workloads recompute statistics over reaching requests") {
    std::vector<TraceRecord> trace;
    for (int i = 0; i < 10; ++i) {
        TraceRecord r;
        r.arrival_s = i;  // 10 records over 9 s
        r.input_tokens = 100 + i;
        r.per_stage.push_back({50.0 + i, i < 5 ? 95.0 : 10.0});
        r.per_stage.push_back({200.0 + i, 80.0});
        trace.push_back(r);
    }
    RoutingThresholds h{{90}};
    auto out = route_trace(trace, h, {true, true});
    const double overall = 10.0 / 9.0;
    CHECK(out.stage_workloads[0].arrival_rate == doctest::Approx(overall));
    CHECK(out.stage_workloads[1].arrival_rate == doctest::Approx(overall * 0.5));
    // Requests 5..9 escalate; their stage-2 outputs are 205..209.
    CHECK(out.stage_workloads[1].mean_output_tokens == doctest::Approx(207.0));
    CHECK(out.stage_workloads[1].p95_input_tokens == 109);
    CHECK(out.stage_workloads[1].p95_output_tokens == 209);
}

TEST_CASE("quality_bounds") {
    auto two_stage = tiny_trace({{50, 90}, {70, 80}});
    auto b = quality_bounds(two_stage, {true, true});
    CHECK(b.q_min == doctest::Approx(60.0));
    CHECK(b.q_max == doctest::Approx(85.0));

    auto single = tiny_trace({{42}, {58}});
    auto bs = quality_bounds(single, {true});
    CHECK(bs.q_min == bs.q_max);
    CHECK(bs.q_min == doctest::Approx(50.0));

    auto perfect = tiny_trace({{10, 100}, {20, 100}});
    CHECK(quality_bounds(perfect, {true, true}).q_max == 100.0);
}

TEST_CASE("errors: empty trace and no deployed stage") {
    CHECK_THROWS_AS(route_trace({}, RoutingThresholds{{50}}, {true, true}),
                    CascadeError);
    auto trace = tiny_trace({{50, 60}});
    CHECK_THROWS_AS(route_trace(trace, RoutingThresholds{{50}}, {false, false}),
                    CascadeError);
    CHECK_THROWS_AS(quality_bounds({}, {true}), CascadeError);
}

TEST_CASE("routing matches the per-request counting oracle") {
    util::Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        const int stages = rng.uniform_int(2, 4);
        auto trace = testfix::random_trace(rng.uniform_int(5, 200), stages,
                                           1.0, rng.raw());
        std::vector<double> h;
        for (int i = 0; i + 1 < stages; ++i)
            h.push_back(rng.uniform() < 0.1 ? kThresholdSentinel
                                            : rng.uniform(0, 100));
        std::vector<bool> deployed(stages, true);
        for (int i = 1; i < stages; ++i)
            if (rng.uniform() < 0.2) deployed[i] = false;

        RoutingThresholds thresholds{h};
        auto out = route_trace(trace, thresholds, deployed);
        auto expected = oracle_route(trace, h, deployed);
        CHECK(out.ratios == expected.ratios);  // exact rational counts
        CHECK(out.quality == expected.quality);

        // Ratio monotonicity over the deployed escalation chain (a skipped
        // stage has ratio 0 regardless of downstream traffic).
        double prev_deployed = 1.0;
        for (std::size_t i = 0; i < out.ratios.size(); ++i) {
            if (!deployed[i]) {
                CHECK(out.ratios[i] == 0.0);
                continue;
            }
            CHECK(out.ratios[i] <= prev_deployed);
            prev_deployed = out.ratios[i];
        }
        std::vector<std::size_t> accepted(stages, 0);
        for (int stage : out.per_request_accept_stage) ++accepted[stage - 1];
        std::size_t total = 0;
        for (auto a : accepted) total += a;
        CHECK(total == trace.size());

        // Pure function: identical inputs give identical outputs.
        auto again = route_trace(trace, thresholds, deployed);
        CHECK(again.ratios == out.ratios);
        CHECK(again.quality == out.quality);
        CHECK(again.per_request_accept_stage == out.per_request_accept_stage);
    }
}

TEST_CASE("raising a threshold never shrinks downstream traffic") {
    util::Rng rng(456);
    for (int trial = 0; trial < 30; ++trial) {
        auto trace = testfix::random_trace(100, 3, 1.0, rng.raw());
        double h1 = rng.uniform(0, 90);
        double h2 = rng.uniform(0, 100);
        auto low = route_trace(trace, RoutingThresholds{{h1, h2}},
                               {true, true, true});
        auto high = route_trace(trace, RoutingThresholds{{h1 + 5, h2}},
                                {true, true, true});
        CHECK(high.ratios[1] >= low.ratios[1]);
    }
}
