// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-stage latency estimation: feasible parallelism strategy enumeration,
// roofline prefill/decode service times, and a seeded queueing estimator for
// p95 latency under a GPU budget.
#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/domain.hpp"

namespace cascade::costmodel {

inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();
inline constexpr int kMaxPipelineParallel = 8;
// Mean of an exponential clamped at 4x its mean: m*(1 - e^-4).
inline constexpr double kClampedExpMeanFactor = 0.98168436111126578;

struct CostModelParams {
    double prefill_efficiency = 0.5;
    double decode_bw_efficiency = 0.7;
    double pipeline_bubble_factor = 0.1;
    double comm_overhead_per_stage = 0.002;  // seconds
    double kv_memory_fraction = 0.9;
    int queueing_sim_requests = 2000;
    std::uint64_t queueing_sim_seed = 12345;
};

void to_json(nlohmann::json& j, const CostModelParams& v);
void from_json(const nlohmann::json& j, CostModelParams& v);
void require_valid(const CostModelParams& p);

/// Loads params from a JSON config file; absent fields keep their defaults.
CostModelParams load_params(const std::string& path);

/// True iff the replica's per-GPU weight share fits in GPU memory and the
/// post-weight KV budget admits kv_tokens tokens of cache. Workload-free
/// callers use the 1-token floor; the planner passes p95_input + p95_output.
bool memory_feasible(const ReplicaShape& shape, const ModelSpec& model,
                     const HardwareSpec& hw,
                     const CostModelParams& params = {},
                     double kv_tokens = 1.0);

/// Smallest tp*pp over legal shapes that is memory-feasible; throws
/// CascadeError(infeasible) when the model fits on no legal shape.
int min_gpus_required(const ModelSpec& model, const HardwareSpec& hw,
                      const CostModelParams& params = {});

/// All feasible replica shapes in canonical order: tp a power of two capped
/// at gpus_per_node, pp in 1..8, memory-feasible at kv_tokens.
std::vector<ReplicaShape> legal_shapes(const ModelSpec& model,
                                       const HardwareSpec& hw,
                                       const CostModelParams& params = {},
                                       double kv_tokens = 1.0);

/// Every multiset of feasible shapes using at most `budget` GPUs, canonical
/// and deduplicated, ordered by (gpus_used, canonical replicas). Empty result
/// signals infeasibility.
std::vector<ParallelismPlan> enumerate_plans(int budget, const ModelSpec& model,
                                             const HardwareSpec& hw,
                                             const CostModelParams& params = {});

struct ServiceTime {
    double prefill_s = 0;
    double decode_per_token_s = 0;
};

/// Roofline service model: prefill is compute-bound (2*P FLOPs per token,
/// divided by tp*pp), decode is memory-bound (weight bytes over tp-aggregated
/// bandwidth); pp adds a bubble multiplier on prefill and a per-stage
/// communication constant to both.
ServiceTime service_time(const ReplicaShape& shape, const ModelSpec& model,
                         const WorkloadStats& w, const HardwareSpec& hw,
                         const CostModelParams& params = {});

struct StageLatencyResult {
    double latency_s = kInfeasible;  // kInfeasible when no stable plan exists
    std::optional<ParallelismPlan> best_plan;

    bool feasible() const { return latency_s != kInfeasible; }
};

/// One latency-vs-budget row for a stage: latency[f] (f in 0..max_budget) is
/// the minimum estimated p95 over all feasible plans using at most f GPUs,
/// with the argmin plan alongside. Rows are non-increasing over feasible f.
struct LatencyRow {
    std::vector<double> latency;
    std::vector<std::optional<ParallelismPlan>> plan;
};

/// Evaluates stage rows with plan-set caching across calls. Results are pure
/// functions of (model, workload, params, max_budget); the cache only avoids
/// re-enumeration. Not thread-safe; internal plan evaluation parallelizes up
/// to the CASCADE_PLANNER_THREADS cap.
class StageEvaluator {
public:
    StageEvaluator(HardwareSpec hw, CostModelParams params);

    const HardwareSpec& hardware() const { return hw_; }
    const CostModelParams& params() const { return params_; }

    LatencyRow row(const ModelSpec& model, const WorkloadStats& w,
                   int max_budget);

private:
    struct CompactPlan {
        std::vector<std::pair<std::uint16_t, std::uint16_t>> parts;  // (shape, count)
        int gpus = 0;
    };
    struct PlanSet {
        std::vector<ReplicaShape> shapes;
        std::vector<CompactPlan> plans;
    };

    const PlanSet& plan_set(const ModelSpec& model, int budget);

    HardwareSpec hw_;
    CostModelParams params_;
    std::map<std::string, PlanSet> plan_cache_;
};

/// Minimum estimated p95 over plans using at most f GPUs (INFEASIBLE when
/// none is stable); f = 0 is feasible only for an empty workload.
StageLatencyResult stage_p95_latency(int budget, const ModelSpec& model,
                                     const WorkloadStats& w,
                                     const HardwareSpec& hw,
                                     const CostModelParams& params = {});

}  // namespace cascade::costmodel
