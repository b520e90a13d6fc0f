// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#include "cascade/routing.hpp"

#include <algorithm>

#include "cascade/util.hpp"

namespace cascade::routing {

namespace {

int last_deployed_stage(const std::vector<bool>& deployed) {
    for (int i = static_cast<int>(deployed.size()) - 1; i >= 0; --i)
        if (deployed[i]) return i;
    return -1;
}

WorkloadStats stats_over(const std::vector<const TraceRecord*>& reached,
                         std::size_t stage, double arrival_rate) {
    WorkloadStats w;
    w.arrival_rate = arrival_rate;
    if (reached.empty()) return w;
    std::vector<double> inputs, outputs;
    inputs.reserve(reached.size());
    outputs.reserve(reached.size());
    for (const TraceRecord* r : reached) {
        inputs.push_back(r->input_tokens);
        outputs.push_back(r->per_stage[stage].output_tokens);
    }
    w.mean_input_tokens = util::mean_of(inputs);
    w.mean_output_tokens = util::mean_of(outputs);
    std::sort(inputs.begin(), inputs.end());
    std::sort(outputs.begin(), outputs.end());
    w.p95_input_tokens = util::quantile_sorted(inputs, 0.95);
    w.p95_output_tokens = util::quantile_sorted(outputs, 0.95);
    return w;
}

}  // namespace

RoutingOutcome route_trace(const std::vector<TraceRecord>& trace,
                           const RoutingThresholds& thresholds,
                           const std::vector<bool>& deployed) {
    if (trace.empty())
        throw CascadeError(Errc::empty_trace, "route_trace: empty trace");
    const auto c = deployed.size();
    const int last = last_deployed_stage(deployed);
    if (last < 0)
        throw CascadeError(Errc::no_deployed_stage,
                           "route_trace: no deployed stage");
    if (c == 0 || thresholds.thresholds.size() != c - 1)
        throw CascadeError(Errc::invalid_input,
                           "route_trace: thresholds length != C-1");
    for (const auto& rec : trace)
        if (rec.per_stage.size() != c)
            throw CascadeError(Errc::invalid_input,
                               "route_trace: trace record stage count != C");

    RoutingOutcome out;
    out.per_request_accept_stage.reserve(trace.size());
    std::vector<std::vector<const TraceRecord*>> reached(c);
    double score_sum = 0.0;

    for (const auto& rec : trace) {
        int accept = last;
        for (std::size_t i = 0; i < c; ++i) {
            if (!deployed[i]) continue;
            reached[i].push_back(&rec);
            if (static_cast<int>(i) == last) {
                accept = last;
                break;
            }
            if (rec.per_stage[i].score >= thresholds.thresholds[i]) {
                accept = static_cast<int>(i);
                break;
            }
        }
        score_sum += rec.per_stage[accept].score;
        out.per_request_accept_stage.push_back(accept + 1);
    }

    const double n = static_cast<double>(trace.size());
    const double rate = overall_arrival_rate(trace);
    out.ratios.resize(c);
    out.stage_workloads.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        out.ratios[i] = static_cast<double>(reached[i].size()) / n;
        out.stage_workloads[i] = stats_over(reached[i], i, rate * out.ratios[i]);
    }
    out.quality = score_sum / n;
    return out;
}

QualityBounds quality_bounds(const std::vector<TraceRecord>& trace,
                             const std::vector<bool>& deployed) {
    if (trace.empty())
        throw CascadeError(Errc::empty_trace, "quality_bounds: empty trace");
    const std::size_t c = deployed.size();
    RoutingThresholds all_accept, all_forward;
    all_accept.thresholds.assign(c > 0 ? c - 1 : 0, 0.0);
    all_forward.thresholds.assign(c > 0 ? c - 1 : 0, kThresholdSentinel);
    QualityBounds b;
    b.q_min = route_trace(trace, all_accept, deployed).quality;
    b.q_max = route_trace(trace, all_forward, deployed).quality;
    return b;
}

}  // namespace cascade::routing
