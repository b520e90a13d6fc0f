// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
//
// Core value types shared by the planner, the routing layer and the
// simulator, plus their JSON encodings and the trace file format.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/errors.hpp"

namespace cascade {

// Thresholds live on the judger score scale [0, 100]; kThresholdSentinel is
// the "always forward" value strictly above every score.
inline constexpr double kScoreMax = 100.0;
inline constexpr double kThresholdSentinel = 101.0;

struct HardwareSpec {
    int gpu_count = 0;
    double flops_per_gpu = 0;           // FLOP/s
    double mem_bandwidth_per_gpu = 0;   // bytes/s
    double mem_capacity_per_gpu = 0;    // bytes
    double intra_node_bw = 0;           // bytes/s
    double inter_node_bw = 0;           // bytes/s
    int gpus_per_node = 0;

    bool operator==(const HardwareSpec&) const = default;
};

struct ModelSpec {
    std::string id;
    double param_count = 0;
    double bytes_per_param = 0;   // quantization-aware (0.5 for INT4)
    double kv_bytes_per_token = 0;
    int min_gpus = 1;             // derived, cached by the config loader
    int stage_index = 1;          // ordinal in 1..C

    double weight_bytes() const { return param_count * bytes_per_param; }

    bool operator==(const ModelSpec&) const = default;
};

struct WorkloadStats {
    double arrival_rate = 0;        // requests/s
    double mean_input_tokens = 0;
    double mean_output_tokens = 0;
    double p95_input_tokens = 0;
    double p95_output_tokens = 0;

    bool operator==(const WorkloadStats&) const = default;
};

struct ReplicaShape {
    int tp = 1;
    int pp = 1;

    int gpus() const { return tp * pp; }

    bool operator==(const ReplicaShape&) const = default;
};

struct ParallelismPlan {
    std::vector<ReplicaShape> replicas;  // length = dp degree, canonical order
    int gpus_used = 0;

    bool operator==(const ParallelismPlan&) const = default;
};

/// Canonical order: descending by tp*pp, then by tp. Plan equality is
/// defined on canonical forms; gpus_used is recomputed.
ParallelismPlan canonicalize(ParallelismPlan plan);

/// Builds a canonical plan from a replica multiset.
ParallelismPlan make_plan(std::vector<ReplicaShape> replicas);

/// Strict total order on canonical plans (used for deterministic tie-breaks).
bool plan_less(const ParallelismPlan& a, const ParallelismPlan& b);

struct RoutingThresholds {
    std::vector<double> thresholds;  // h_1..h_{C-1}, each in [0, 101]

    bool operator==(const RoutingThresholds&) const = default;
};

struct StageRecord {
    double output_tokens = 0;
    double score = 0;  // judger score in [0, 100]

    bool operator==(const StageRecord&) const = default;
};

struct TraceRecord {
    double arrival_s = 0;
    double input_tokens = 0;
    std::vector<StageRecord> per_stage;  // one entry per cascade stage

    bool operator==(const TraceRecord&) const = default;
};

struct CascadePlan {
    std::vector<int> allocations;                        // f_1..f_C
    std::vector<std::optional<ParallelismPlan>> plans;   // absent iff f_i = 0
    RoutingThresholds thresholds;
    double predicted_max_p95_s = 0;                      // L
    double predicted_quality = 0;                        // Q
    std::vector<double> processing_ratios;               // p_1..p_C

    bool operator==(const CascadePlan&) const = default;
};

struct ObjectivePoint {
    double latency_s = 0;  // L(theta)
    double quality = 0;    // Q(theta)
    RoutingThresholds thresholds;
    CascadePlan plan_ref;

    bool operator==(const ObjectivePoint&) const = default;
};

/// Report-based validation: returns one message per violated invariant
/// (budget sum, per-replica memory fit, ratio monotonicity, structural
/// coupling). Empty report iff the plan is valid.
std::vector<std::string> validate_plan(const CascadePlan& plan,
                                       const HardwareSpec& hw,
                                       const std::vector<ModelSpec>& models);

// Construction-time validators; throw CascadeError(invalid_input) listing
// every violated invariant.
void require_valid(const HardwareSpec& hw);
void require_valid(const std::vector<ModelSpec>& models);
void require_valid(const WorkloadStats& w);
void require_valid(const TraceRecord& r, int expected_stages);

// JSON encodings (field names match the type definitions).
void to_json(nlohmann::json& j, const HardwareSpec& v);
void from_json(const nlohmann::json& j, HardwareSpec& v);
void to_json(nlohmann::json& j, const ModelSpec& v);
void from_json(const nlohmann::json& j, ModelSpec& v);
void to_json(nlohmann::json& j, const WorkloadStats& v);
void from_json(const nlohmann::json& j, WorkloadStats& v);
void to_json(nlohmann::json& j, const ReplicaShape& v);
void from_json(const nlohmann::json& j, ReplicaShape& v);
void to_json(nlohmann::json& j, const ParallelismPlan& v);
void from_json(const nlohmann::json& j, ParallelismPlan& v);
void to_json(nlohmann::json& j, const RoutingThresholds& v);
void from_json(const nlohmann::json& j, RoutingThresholds& v);
void to_json(nlohmann::json& j, const StageRecord& v);
void from_json(const nlohmann::json& j, StageRecord& v);
void to_json(nlohmann::json& j, const TraceRecord& v);
void from_json(const nlohmann::json& j, TraceRecord& v);
void to_json(nlohmann::json& j, const CascadePlan& v);
void from_json(const nlohmann::json& j, CascadePlan& v);
void to_json(nlohmann::json& j, const ObjectivePoint& v);
void from_json(const nlohmann::json& j, ObjectivePoint& v);

/// JSONL trace files: one TraceRecord per line, arrivals non-decreasing.
std::vector<TraceRecord> read_trace_jsonl(const std::string& path);
void write_trace_jsonl(const std::string& path,
                       const std::vector<TraceRecord>& trace);

/// n / (last - first) arrival-rate estimate; 0 when the span is degenerate.
double overall_arrival_rate(const std::vector<TraceRecord>& trace);

}  // namespace cascade
