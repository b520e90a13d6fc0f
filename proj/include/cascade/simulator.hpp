// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
//
// Trace-driven discrete-event validation of a cascade plan: per-request
// end-to-end latency, SLO-attainment curves and throughput.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "cascade/costmodel.hpp"
#include "cascade/domain.hpp"

namespace cascade::sim {

struct SimConfig {
    std::uint64_t seed = 0;
    // Empirical single-request latency; <= 0 resolves it from a no-contention
    // dry run over the trace's accept paths.
    double slo_base_s = 0;
    std::vector<double> slo_scales = {1,  1.5, 2,  2.5, 3,  4,  5,
                                      6,  8,   10, 12,  14, 16, 20};
    double warmup_fraction = 0.1;  // leading requests excluded from metrics
};

void to_json(nlohmann::json& j, const SimConfig& v);
void from_json(const nlohmann::json& j, SimConfig& v);

struct RequestSim {
    double end_to_end_s = 0;
    int accept_stage = 0;  // 1-based
};

struct AttainmentPoint {
    double scale = 0;
    double fraction = 0;
};

struct SimReport {
    std::vector<RequestSim> per_request;  // trace order, one entry per request
    double p95_s = 0;
    double throughput_rps = 0;
    std::vector<AttainmentPoint> attainment;
    std::optional<double> min_scale_95;
    double slo_base_s = 0;                // resolved base
    std::vector<int> unstable_stages;     // 1-based, queue-growth warning only
};

void to_json(nlohmann::json& j, const SimReport& v);
void from_json(const nlohmann::json& j, SimReport& v);

/// Event-driven execution of the plan over the trace: FCFS replica queues per
/// stage, join-shortest-expected-work dispatch, service times from the cost
/// model with the trace's actual token counts. Escalated requests re-enter
/// the next deployed stage's queue at their forward time. Deterministic.
SimReport run(const CascadePlan& plan, const std::vector<TraceRecord>& trace,
              const std::vector<ModelSpec>& models, const HardwareSpec& hw,
              const costmodel::CostModelParams& params, const SimConfig& cfg);

/// Fraction of non-warmup requests finishing within scale * slo_base_s, per
/// configured scale; monotone in scale.
std::vector<AttainmentPoint> attainment_curve(const SimReport& report,
                                              const SimConfig& cfg);

struct CompareRow {
    double p95_s = 0;
    double throughput_rps = 0;
    std::optional<double> min_scale_95;
};

struct CompareResult {
    std::vector<SimReport> reports;
    std::vector<CompareRow> rows;
};

void to_json(nlohmann::json& j, const CompareResult& v);

/// Runs every plan over the identical trace and seed (common random numbers).
/// An auto SLO base (cfg.slo_base_s <= 0) is resolved from the first plan and
/// shared so min_scale_95 values are comparable.
CompareResult compare(const std::vector<CascadePlan>& plans,
                      const std::vector<TraceRecord>& trace,
                      const std::vector<ModelSpec>& models, const HardwareSpec& hw,
                      const costmodel::CostModelParams& params,
                      const SimConfig& cfg);

/// CSV export of an attainment curve: scale,fraction per line.
std::string attainment_to_csv(const std::vector<AttainmentPoint>& curve);

}  // namespace cascade::sim
