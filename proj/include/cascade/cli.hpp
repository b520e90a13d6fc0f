// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
//
// File-based command pipeline: plan -> simulate -> drift, plus a synthetic
// trace generator. The CLI binary is a thin argv wrapper over these
// functions; tests drive them directly.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/costmodel.hpp"
#include "cascade/domain.hpp"
#include "cascade/outerplan.hpp"
#include "cascade/simulator.hpp"

namespace cascade::cli {

struct DriftPolicy {
    int window_requests = 100;        // subsample size per window
    double window_interval_s = 600;   // window length
    double rel_tolerance = 0.2;       // strict > comparison per statistic
};

void to_json(nlohmann::json& j, const DriftPolicy& v);
void from_json(const nlohmann::json& j, DriftPolicy& v);
void require_valid(const DriftPolicy& p);

/// One JSON document: hardware, models, cost model, sweep grid, drift policy.
struct PlannerConfig {
    HardwareSpec hardware;
    std::vector<ModelSpec> models;
    costmodel::CostModelParams cost_model;
    outerplan::SweepConfig sweep;
    DriftPolicy drift;
};

void to_json(nlohmann::json& j, const PlannerConfig& v);
void from_json(const nlohmann::json& j, PlannerConfig& v);

/// Loads and validates a planner config; fills each model's cached min_gpus.
PlannerConfig load_planner_config(const std::string& path);

// Workload statistics monitored for drift (recorded by cmd_plan, compared
// window by window by cmd_drift).
struct DriftBaseline {
    double arrival_rate = 0;
    double mean_input_tokens = 0;
    double mean_output_tokens = 0;   // stage-1 outputs
    double stage1_accept_rate = 1;   // fraction with score_1 >= h_1
    std::optional<double> h1;        // absent for single-stage cascades
};

void to_json(nlohmann::json& j, const DriftBaseline& v);
void from_json(const nlohmann::json& j, DriftBaseline& v);

DriftBaseline compute_baseline(const std::vector<TraceRecord>& trace,
                               const CascadePlan& plan);

struct PlanArgs {
    std::string config_path;
    std::string trace_path;
    std::string out_dir;
    std::optional<double> min_quality;
    std::optional<double> max_latency;
    std::optional<std::uint64_t> seed;  // overrides queueing_sim_seed
};

struct PlanResult {
    CascadePlan plan;
    outerplan::SweepResult sweep;
    std::string plan_path;
    std::string front_json_path;
    std::string front_csv_path;
    std::string sweep_path;
    std::string baseline_path;
};

/// Writes plan.json, front.json, front.csv, sweep.json and
/// baseline_stats.json into out_dir.
PlanResult cmd_plan(const PlanArgs& args);

struct SimulateArgs {
    std::string config_path;
    std::string plan_path;
    std::string trace_path;
    std::string out_dir;
    std::vector<double> scales;  // empty: SimConfig defaults
    double slo_base_s = 0;       // <= 0: auto from dry run
    std::uint64_t seed = 0;
    double warmup_fraction = 0.1;
};

struct SimulateResult {
    sim::SimReport report;
    std::string report_path;
    std::string attainment_csv_path;
};

/// Writes report.json and attainment.csv into out_dir.
SimulateResult cmd_simulate(const SimulateArgs& args);

struct DriftArgs {
    std::string config_path;
    std::string baseline_path;
    std::string trace_path;  // stream to monitor
    std::string out_dir;
    bool replan = false;
    std::optional<double> min_quality;  // forwarded to cmd_plan on replan
    std::optional<double> max_latency;
    std::optional<std::uint64_t> seed;
};

struct DriftWindowReport {
    double start_s = 0;
    double span_s = 0;
    int requests = 0;          // requests in the window
    int sampled = 0;           // subsample actually used for statistics
    DriftBaseline stats;       // current window statistics
    nlohmann::json deviations; // per-statistic relative deviation (null if base=0)
    std::vector<std::string> drifted_stats;
    bool any_drift = false;
};

struct DriftResult {
    std::vector<DriftWindowReport> windows;
    bool drift_detected = false;
    bool replanned = false;
    std::string report_path;
    std::optional<PlanResult> replan;
};

/// Windows the stream per the policy, flags relative deviations beyond
/// tolerance, and (with replan=true) re-plans on the most recent window's
/// subsample when drift is detected. Writes drift_report.json.
DriftResult cmd_drift(const DriftArgs& args);

// Synthetic trace generation. Distribution spec:
//   {"dist":"fixed","value":v} | {"dist":"uniform","min":a,"max":b} |
//   {"dist":"exponential","mean":m[,"max":cap]} |
//   {"dist":"normal","mean":m,"std":s[,"min":a][,"max":b]} |
//   {"dist":"choice","values":[...][,"weights":[...]]}
struct DistSpec {
    std::string dist = "fixed";
    double value = 0, min = 0, max = 0, mean = 0, std = 0;
    bool has_min = false, has_max = false;
    std::vector<double> values;
    std::vector<double> weights;
};

void from_json(const nlohmann::json& j, DistSpec& v);

struct TraceGenStage {
    DistSpec output_tokens;
    DistSpec score;
};

struct TraceGenSpec {
    int count = 0;
    double arrival_rate = 1.0;
    DistSpec input_tokens;
    std::vector<TraceGenStage> stages;
};

void from_json(const nlohmann::json& j, TraceGenSpec& v);

std::vector<TraceRecord> generate_trace(const TraceGenSpec& spec,
                                        std::uint64_t seed);

struct GenTraceArgs {
    std::string spec_path;  // generator spec (passed via --config)
    std::string out_dir;
    std::uint64_t seed = 0;
    std::optional<int> count_override;
};

struct GenTraceResult {
    std::string trace_path;
    int count = 0;
};

/// Writes trace.jsonl into out_dir; deterministic for a fixed seed.
GenTraceResult cmd_gen_trace(const GenTraceArgs& args);

/// Shared helper: creates out_dir (recursively) and writes content to
/// out_dir/name, returning the full path.
std::string write_output_file(const std::string& out_dir,
                              const std::string& name,
                              const std::string& content);

}  // namespace cascade::cli
