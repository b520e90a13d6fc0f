// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
//
// Outer optimization: sweep routing-threshold candidates, solve the inner
// allocation problem per candidate, score the (latency, quality) trade-off
// with the weighted Tchebycheff objective, and keep the Pareto front.
#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "cascade/costmodel.hpp"
#include "cascade/domain.hpp"

namespace cascade::outerplan {

struct UtopiaPoint {
    double z1_star = 0;  // minimum latency (all requests on the smallest model)
    double z2_star = 0;  // maximum quality (all requests on the largest model)
};

struct WeightPair {
    double lambda1 = 0.5;
    double lambda2 = 0.5;
};

struct ParetoFront {
    std::vector<ObjectivePoint> points;  // sorted by latency ascending
};

void to_json(nlohmann::json& j, const UtopiaPoint& v);
void from_json(const nlohmann::json& j, UtopiaPoint& v);
void to_json(nlohmann::json& j, const WeightPair& v);
void from_json(const nlohmann::json& j, WeightPair& v);
void to_json(nlohmann::json& j, const ParetoFront& v);
void from_json(const nlohmann::json& j, ParetoFront& v);

/// T(theta) = max(lambda1*(L - z1*), lambda2*(z2* - Q)).
double tchebycheff_score(double latency_s, double quality, const UtopiaPoint& z,
                         const WeightPair& w);

/// z1* from the full budget given to stage 1 under the whole trace's
/// workload; z2* from routing the whole trace to the last stage. Throws
/// CascadeError(infeasible) when even the smallest model cannot be served.
UtopiaPoint compute_utopia(const std::vector<TraceRecord>& trace,
                           const std::vector<ModelSpec>& models,
                           const HardwareSpec& hw,
                           const costmodel::CostModelParams& params, int total_gpus);

/// Maximal non-dominated subset (minimize latency, maximize quality),
/// duplicates collapsed, ordered by latency ascending.
ParetoFront pareto_filter(const std::vector<ObjectivePoint>& points);

struct SweepConfig {
    // Candidate threshold values per threshold dimension (C-1 dims). Empty:
    // per-stage score deciles plus 0 and the 101 always-forward sentinel.
    std::vector<std::vector<double>> threshold_grid;
    double weight_ratio_min = 0.1;  // lambda1/lambda2 ladder (log-spaced)
    double weight_ratio_max = 10.0;
    int weight_count = 9;
};

void to_json(nlohmann::json& j, const SweepConfig& v);
void from_json(const nlohmann::json& j, SweepConfig& v);

std::vector<std::vector<double>> default_threshold_grid(
    const std::vector<TraceRecord>& trace, std::size_t stages);

std::vector<WeightPair> weight_ladder(const SweepConfig& cfg);

struct SweepResult {
    ParetoFront front;
    std::vector<ObjectivePoint> evaluations;  // all feasible candidates, grid order
    std::vector<WeightPair> weights;
    std::vector<int> weight_selection;        // per weight: index into evaluations
    UtopiaPoint utopia;
    std::vector<RoutingThresholds> skipped;   // candidates with no feasible allocation
};

void to_json(nlohmann::json& j, const SweepResult& v);

/// Evaluates every threshold vector in the grid: route the trace, solve the
/// inner min-max allocation over the stages that receive traffic, and record
/// (L, Q) with the full cascade plan. Stage latency rows are cached by
/// workload fingerprint. Throws CascadeError(infeasible_problem) only when
/// every candidate is infeasible.
SweepResult sweep(const std::vector<TraceRecord>& trace,
                  const std::vector<ModelSpec>& models, const HardwareSpec& hw,
                  const costmodel::CostModelParams& params, int total_gpus,
                  const SweepConfig& cfg);

struct PlanRequirement {
    std::optional<double> min_quality;
    std::optional<double> max_latency;
};

/// min_quality: lowest-latency front point with quality >= bound.
/// max_latency: highest-quality front point with latency <= bound.
/// Exactly one bound must be set.
CascadePlan select_plan(const ParetoFront& front, const PlanRequirement& req);

/// CSV export: latency_s,quality,h_1..h_{C-1},f_1..f_C.
std::string front_to_csv(const ParetoFront& front);

}  // namespace cascade::outerplan
