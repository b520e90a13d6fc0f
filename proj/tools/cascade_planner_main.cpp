// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cascade/cli.hpp"

namespace {

int fail(const cascade::CascadeError& e) {
    nlohmann::json err{{"error", {{"code", e.code_name()}, {"message", e.what()}}}};
    std::cout << err.dump() << std::endl;
    return cascade::errc_exit_code(e.code());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Capacity planner and trace-driven simulator for LLM model "
                 "cascades"};
    app.require_subcommand(1);

    std::string config, trace, out_dir = ".", plan_path, baseline_path;
    std::uint64_t seed = 0;
    double min_quality = 0, max_latency = 0, slo_base = 0, warmup = 0.1;
    std::vector<double> scales;
    std::optional<int> gen_count;
    bool replan = false;

    auto* plan = app.add_subcommand("plan", "Compute a cascade plan and Pareto front");
    plan->add_option("--config", config, "Planner config JSON")->required();
    plan->add_option("--trace", trace, "Workload trace JSONL")->required();
    auto* pq = plan->add_option("--min-quality", min_quality,
                                "Pick the lowest-latency plan with at least this quality");
    auto* pl = plan->add_option("--max-latency", max_latency,
                                "Pick the highest-quality plan within this p95 latency (s)");
    auto* ps = plan->add_option("--seed", seed, "Queueing estimator seed override");
    plan->add_option("--out-dir", out_dir, "Output directory");

    auto* simulate = app.add_subcommand("simulate", "Replay a trace against a plan");
    simulate->add_option("--config", config, "Planner config JSON")->required();
    simulate->add_option("--plan", plan_path, "Plan JSON from `plan`")->required();
    simulate->add_option("--trace", trace, "Workload trace JSONL")->required();
    simulate->add_option("--scales", scales, "SLO scale multipliers")->delimiter(',');
    simulate->add_option("--slo-base", slo_base,
                         "SLO base seconds (default: dry-run single-request latency)");
    simulate->add_option("--warmup", warmup, "Warmup fraction excluded from metrics");
    simulate->add_option("--seed", seed, "Simulation seed");
    simulate->add_option("--out-dir", out_dir, "Output directory");

    auto* drift = app.add_subcommand("drift", "Detect workload drift against a baseline");
    drift->add_option("--config", config, "Planner config JSON")->required();
    drift->add_option("--baseline", baseline_path,
                      "baseline_stats.json from a prior `plan`")->required();
    drift->add_option("--trace", trace, "Stream trace JSONL")->required();
    drift->add_flag("--replan", replan, "Re-plan on the recent window when drift is detected");
    auto* dq = drift->add_option("--min-quality", min_quality, "Replan quality requirement");
    auto* dl = drift->add_option("--max-latency", max_latency, "Replan latency requirement");
    auto* ds = drift->add_option("--seed", seed, "Replan seed override");
    drift->add_option("--out-dir", out_dir, "Output directory");

    auto* gen = app.add_subcommand("gen-trace", "Generate a synthetic JSONL trace");
    gen->add_option("--config", config, "Trace generator spec JSON")->required();
    gen->add_option("--seed", seed, "Generator seed");
    auto* gc = gen->add_option("--count", gen_count, "Override request count");
    gen->add_option("--out-dir", out_dir, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*plan) {
            cascade::cli::PlanArgs args;
            args.config_path = config;
            args.trace_path = trace;
            args.out_dir = out_dir;
            if (pq->count()) args.min_quality = min_quality;
            if (pl->count()) args.max_latency = max_latency;
            if (ps->count()) args.seed = seed;
            auto result = cascade::cli::cmd_plan(args);
            std::cout << "plan: " << result.plan_path << "\n"
                      << "front: " << result.front_json_path << " ("
                      << result.sweep.front.points.size() << " points)\n";
        } else if (*simulate) {
            cascade::cli::SimulateArgs args;
            args.config_path = config;
            args.plan_path = plan_path;
            args.trace_path = trace;
            args.out_dir = out_dir;
            args.scales = scales;
            args.slo_base_s = slo_base;
            args.warmup_fraction = warmup;
            args.seed = seed;
            auto result = cascade::cli::cmd_simulate(args);
            std::cout << "report: " << result.report_path << "\n"
                      << "p95_s: " << result.report.p95_s << "\n";
        } else if (*drift) {
            cascade::cli::DriftArgs args;
            args.config_path = config;
            args.baseline_path = baseline_path;
            args.trace_path = trace;
            args.out_dir = out_dir;
            args.replan = replan;
            if (dq->count()) args.min_quality = min_quality;
            if (dl->count()) args.max_latency = max_latency;
            if (ds->count()) args.seed = seed;
            auto result = cascade::cli::cmd_drift(args);
            std::cout << "drift_detected: " << (result.drift_detected ? "true" : "false")
                      << "\nreport: " << result.report_path << "\n";
        } else if (*gen) {
            cascade::cli::GenTraceArgs args;
            args.spec_path = config;
            args.out_dir = out_dir;
            args.seed = seed;
            if (gc->count()) args.count_override = gen_count;
            auto result = cascade::cli::cmd_gen_trace(args);
            std::cout << "trace: " << result.trace_path << " (" << result.count
                      << " requests)\n";
        }
    } catch (const cascade::CascadeError& e) {
        return fail(e);
    } catch (const std::exception& e) {
        nlohmann::json err{{"error", {{"code", "INTERNAL"}, {"message", e.what()}}}};
        std::cout << err.dump() << std::endl;
        return 1;
    }
    return 0;
}
