// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
//
// Threshold-based cascade routing over annotated traces: requests enter the
// smallest deployed stage and escalate until a stage's judged score meets its
// threshold (the last deployed stage always accepts).
#pragma once

#include <vector>

#include "cascade/domain.hpp"

namespace cascade::routing {

struct RoutingOutcome {
    std::vector<double> ratios;                 // p_1..p_C, fraction reaching stage
    std::vector<WorkloadStats> stage_workloads; // arrival rate scaled by p_i
    double quality = 0;                         // Q(theta), mean accepted score
    std::vector<int> per_request_accept_stage;  // 1-based stage numbers
};

/// Routes every trace request through the deployed stages under thresholds H.
/// Undeployed stages are skipped in the escalation chain. Stage workloads are
/// recomputed over exactly the requests reaching each stage; arrival_rate_i is
/// the overall trace rate scaled by p_i.
RoutingOutcome route_trace(const std::vector<TraceRecord>& trace,
                           const RoutingThresholds& thresholds,
                           const std::vector<bool>& deployed);

struct QualityBounds {
    double q_min = 0;  // quality with every request accepted at the first stage
    double q_max = 0;  // quality with every request forwarded to the last stage
};

/// q_min/q_max are the qualities at the all-accept and all-forward threshold
/// extremes. q_min <= q_max is not guaranteed and not asserted.
QualityBounds quality_bounds(const std::vector<TraceRecord>& trace,
                             const std::vector<bool>& deployed);

}  // namespace cascade::routing
