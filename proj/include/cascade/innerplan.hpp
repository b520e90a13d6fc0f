// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
//
// Inner optimization: given per-stage workloads and the GPU budget, pick one
// allocation per stage minimizing the maximum stage latency. The solver is
// exact for this min-max assignment structure; an LP-format export allows
// independent verification with any MILP solver.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/costmodel.hpp"
#include "cascade/domain.hpp"

namespace cascade::innerplan {

using costmodel::kInfeasible;

/// Latency matrix l_i(f) for i in 1..C, f in 0..N; kInfeasible marks masked
/// cells. Rows are non-increasing across feasible f, feasibility is
/// upward-closed in f, and a zero-arrival stage has an all-zero row.
struct LatencyTable {
    int gpu_budget = 0;  // N
    std::vector<std::vector<double>> entries;
    std::vector<std::vector<std::optional<ParallelismPlan>>> best_plans;

    int stages() const { return static_cast<int>(entries.size()); }
};

void to_json(nlohmann::json& j, const LatencyTable& v);
void from_json(const nlohmann::json& j, LatencyTable& v);

/// Throws CascadeError(invalid_input) when the table violates its invariants.
void validate_table(const LatencyTable& table);

LatencyTable build_latency_table(const std::vector<WorkloadStats>& workloads,
                                 const std::vector<ModelSpec>& models,
                                 const HardwareSpec& hw,
                                 const costmodel::CostModelParams& params);

/// Variant reusing a caller-owned evaluator (plan-set caches survive across
/// sweep candidates).
LatencyTable build_latency_table(costmodel::StageEvaluator& evaluator,
                                 const std::vector<WorkloadStats>& workloads,
                                 const std::vector<ModelSpec>& models, int budget);

struct AllocationSolution {
    std::vector<int> allocations;  // f_1..f_C, sum = N
    double objective_L = 0;        // max_i per_stage_latency[i]
    std::vector<double> per_stage_latency;
    std::vector<std::optional<ParallelismPlan>> per_stage_plan;
};

/// Exact min-max solve: binary search on L over the sorted multiset of cell
/// latencies with a greedy feasibility check (each stage's minimum f with
/// l_i(f) <= L), slack pushed to the last stage so the allocation vector is
/// lexicographically smallest. Throws CascadeError(infeasible_problem) when
/// no assignment meets the budget.
AllocationSolution solve_min_max(const LatencyTable& table, int total_gpus);

/// Emits the min-max MILP in LP text format: binaries x_i_f per feasible
/// cell, continuous L, one assignment row per stage, the budget equality and
/// one max-latency row per stage. Masked cells get no variable.
std::string export_milp(const LatencyTable& table, int total_gpus);

}  // namespace cascade::innerplan
