// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#include "cascade/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cascade {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::invalid_input: return "INVALID_INPUT";
        case Errc::io_error: return "IO_ERROR";
        case Errc::empty_trace: return "EMPTY_TRACE";
        case Errc::no_deployed_stage: return "NO_DEPLOYED_STAGE";
        case Errc::infeasible: return "INFEASIBLE";
        case Errc::infeasible_problem: return "INFEASIBLE_PROBLEM";
        case Errc::no_feasible_point: return "NO_FEASIBLE_POINT";
    }
    return "UNKNOWN";
}

int errc_exit_code(Errc c) {
    switch (c) {
        case Errc::no_feasible_point: return 2;
        case Errc::infeasible:
        case Errc::infeasible_problem: return 3;
        default: return 4;
    }
}

namespace {

bool shape_before(const ReplicaShape& a, const ReplicaShape& b) {
    if (a.gpus() != b.gpus()) return a.gpus() > b.gpus();
    return a.tp > b.tp;
}

void throw_if_any(std::vector<std::string> problems, const char* what) {
    if (problems.empty()) return;
    std::ostringstream msg;
    msg << what << ":";
    for (const auto& p : problems) msg << " " << p << ";";
    throw CascadeError(Errc::invalid_input, msg.str());
}

}  // namespace

ParallelismPlan canonicalize(ParallelismPlan plan) {
    std::stable_sort(plan.replicas.begin(), plan.replicas.end(), shape_before);
    plan.gpus_used = 0;
    for (const auto& r : plan.replicas) plan.gpus_used += r.gpus();
    return plan;
}

ParallelismPlan make_plan(std::vector<ReplicaShape> replicas) {
    ParallelismPlan p;
    p.replicas = std::move(replicas);
    return canonicalize(std::move(p));
}

bool plan_less(const ParallelismPlan& a, const ParallelismPlan& b) {
    return std::lexicographical_compare(
        a.replicas.begin(), a.replicas.end(), b.replicas.begin(),
        b.replicas.end(), [](const ReplicaShape& x, const ReplicaShape& y) {
            if (x.tp != y.tp) return x.tp < y.tp;
            return x.pp < y.pp;
        });
}

std::vector<std::string> validate_plan(const CascadePlan& plan,
                                       const HardwareSpec& hw,
                                       const std::vector<ModelSpec>& models) {
    std::vector<std::string> report;
    const std::size_t c = models.size();
    if (plan.allocations.size() != c || plan.plans.size() != c ||
        plan.processing_ratios.size() != c) {
        report.push_back("structural: allocations/plans/ratios length != C");
        return report;
    }
    if (c > 0 && plan.thresholds.thresholds.size() != c - 1)
        report.push_back("structural: thresholds length != C-1");

    long long total = 0;
    for (int f : plan.allocations) {
        if (f < 0) report.push_back("allocation negative");
        total += f;
    }
    if (total != hw.gpu_count)
        report.push_back("budget: sum of allocations " + std::to_string(total) +
                         " != N " + std::to_string(hw.gpu_count));

    for (std::size_t i = 0; i < c; ++i) {
        const int f = plan.allocations[i];
        const bool has_plan = plan.plans[i].has_value();
        const double ratio = plan.processing_ratios[i];
        const std::string stage = "stage " + std::to_string(i + 1);
        if ((f == 0) != !has_plan)
            report.push_back(stage + ": allocation/plan coupling violated");
        if ((f == 0) != (ratio == 0.0))
            report.push_back(stage + ": allocation/ratio coupling violated");
        if (ratio < 0.0 || ratio > 1.0)
            report.push_back(stage + ": ratio outside [0,1]");
        if (has_plan) {
            const auto& pp = *plan.plans[i];
            if (pp.replicas.empty()) report.push_back(stage + ": plan has no replicas");
            int used = 0;
            for (const auto& r : pp.replicas) {
                used += r.gpus();
                if (r.tp < 1 || r.pp < 1)
                    report.push_back(stage + ": replica degrees below 1");
                // Per-replica weight memory fit (KV-aware feasibility is the
                // cost model's concern).
                double per_gpu = models[i].weight_bytes() / r.gpus();
                if (per_gpu > hw.mem_capacity_per_gpu)
                    report.push_back(stage + ": replica weights exceed GPU memory");
            }
            if (used != pp.gpus_used)
                report.push_back(stage + ": gpus_used inconsistent with replicas");
            if (used > f)
                report.push_back(stage + ": plan uses more GPUs than allocated");
            if (!(canonicalize(pp) == pp))
                report.push_back(stage + ": replicas not in canonical order");
        }
    }
    // Ratio monotonicity over the deployed escalation chain: undeployed
    // stages are skipped, the first deployed stage receives every request.
    bool seen_deployed = false;
    double prev_ratio = 1.0;
    for (std::size_t i = 0; i < c; ++i) {
        if (plan.allocations[i] == 0) continue;
        const double ratio = plan.processing_ratios[i];
        if (!seen_deployed && ratio != 1.0)
            report.push_back("first deployed stage has ratio != 1");
        if (seen_deployed && ratio > prev_ratio)
            report.push_back("stage " + std::to_string(i + 1) +
                             ": ratio exceeds upstream deployed stage");
        prev_ratio = ratio;
        seen_deployed = true;
    }
    for (double h : plan.thresholds.thresholds)
        if (h < 0.0 || h > kThresholdSentinel)
            report.push_back("threshold outside [0," +
                             std::to_string(kThresholdSentinel) + "]");
    return report;
}

void require_valid(const HardwareSpec& hw) {
    std::vector<std::string> problems;
    if (hw.gpu_count <= 0) problems.push_back("gpu_count must be positive");
    if (hw.flops_per_gpu <= 0) problems.push_back("flops_per_gpu must be positive");
    if (hw.mem_bandwidth_per_gpu <= 0)
        problems.push_back("mem_bandwidth_per_gpu must be positive");
    if (hw.mem_capacity_per_gpu <= 0)
        problems.push_back("mem_capacity_per_gpu must be positive");
    if (hw.intra_node_bw <= 0) problems.push_back("intra_node_bw must be positive");
    if (hw.inter_node_bw <= 0) problems.push_back("inter_node_bw must be positive");
    if (hw.gpus_per_node <= 0) problems.push_back("gpus_per_node must be positive");
    throw_if_any(std::move(problems), "invalid HardwareSpec");
}

void require_valid(const std::vector<ModelSpec>& models) {
    std::vector<std::string> problems;
    if (models.empty()) problems.push_back("model cascade is empty");
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto& m = models[i];
        if (m.id.empty()) problems.push_back("model id empty");
        if (m.param_count < 0) problems.push_back(m.id + ": param_count negative");
        if (m.bytes_per_param < 0) problems.push_back(m.id + ": bytes_per_param negative");
        if (m.kv_bytes_per_token < 0)
            problems.push_back(m.id + ": kv_bytes_per_token negative");
        if (m.min_gpus < 1) problems.push_back(m.id + ": min_gpus below 1");
        if (m.stage_index != static_cast<int>(i) + 1)
            problems.push_back(m.id + ": stage_index not ordinal " +
                               std::to_string(i + 1));
        if (i > 0 && m.param_count < models[i - 1].param_count)
            problems.push_back(m.id + ": param_count decreases along the cascade");
    }
    throw_if_any(std::move(problems), "invalid model cascade");
}

void require_valid(const WorkloadStats& w) {
    std::vector<std::string> problems;
    if (w.arrival_rate < 0) problems.push_back("arrival_rate negative");
    if (w.mean_input_tokens < 0 || w.mean_output_tokens < 0 ||
        w.p95_input_tokens < 0 || w.p95_output_tokens < 0)
        problems.push_back("token statistic negative");
    if (w.p95_input_tokens < w.mean_input_tokens)
        problems.push_back("p95_input_tokens below mean");
    if (w.p95_output_tokens < w.mean_output_tokens)
        problems.push_back("p95_output_tokens below mean");
    throw_if_any(std::move(problems), "invalid WorkloadStats");
}

void require_valid(const TraceRecord& r, int expected_stages) {
    std::vector<std::string> problems;
    if (r.input_tokens < 0) problems.push_back("input_tokens negative");
    if (expected_stages >= 0 &&
        r.per_stage.size() != static_cast<std::size_t>(expected_stages))
        problems.push_back("per_stage length != C");
    for (const auto& s : r.per_stage) {
        if (s.output_tokens < 0) problems.push_back("output_tokens negative");
        if (s.score < 0.0 || s.score > kScoreMax)
            problems.push_back("score outside [0,100]");
    }
    throw_if_any(std::move(problems), "invalid TraceRecord");
}

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

void to_json(json& j, const HardwareSpec& v) {
    j = json{{"gpu_count", v.gpu_count},
             {"flops_per_gpu", v.flops_per_gpu},
             {"mem_bandwidth_per_gpu", v.mem_bandwidth_per_gpu},
             {"mem_capacity_per_gpu", v.mem_capacity_per_gpu},
             {"intra_node_bw", v.intra_node_bw},
             {"inter_node_bw", v.inter_node_bw},
             {"gpus_per_node", v.gpus_per_node}};
}

void from_json(const json& j, HardwareSpec& v) {
    j.at("gpu_count").get_to(v.gpu_count);
    j.at("flops_per_gpu").get_to(v.flops_per_gpu);
    j.at("mem_bandwidth_per_gpu").get_to(v.mem_bandwidth_per_gpu);
    j.at("mem_capacity_per_gpu").get_to(v.mem_capacity_per_gpu);
    j.at("intra_node_bw").get_to(v.intra_node_bw);
    j.at("inter_node_bw").get_to(v.inter_node_bw);
    j.at("gpus_per_node").get_to(v.gpus_per_node);
}

void to_json(json& j, const ModelSpec& v) {
    j = json{{"id", v.id},
             {"param_count", v.param_count},
             {"bytes_per_param", v.bytes_per_param},
             {"kv_bytes_per_token", v.kv_bytes_per_token},
             {"min_gpus", v.min_gpus},
             {"stage_index", v.stage_index}};
}

void from_json(const json& j, ModelSpec& v) {
    j.at("id").get_to(v.id);
    j.at("param_count").get_to(v.param_count);
    j.at("bytes_per_param").get_to(v.bytes_per_param);
    j.at("kv_bytes_per_token").get_to(v.kv_bytes_per_token);
    v.min_gpus = j.value("min_gpus", 1);
    j.at("stage_index").get_to(v.stage_index);
}

void to_json(json& j, const WorkloadStats& v) {
    j = json{{"arrival_rate", v.arrival_rate},
             {"mean_input_tokens", v.mean_input_tokens},
             {"mean_output_tokens", v.mean_output_tokens},
             {"p95_input_tokens", v.p95_input_tokens},
             {"p95_output_tokens", v.p95_output_tokens}};
}

void from_json(const json& j, WorkloadStats& v) {
    j.at("arrival_rate").get_to(v.arrival_rate);
    j.at("mean_input_tokens").get_to(v.mean_input_tokens);
    j.at("mean_output_tokens").get_to(v.mean_output_tokens);
    j.at("p95_input_tokens").get_to(v.p95_input_tokens);
    j.at("p95_output_tokens").get_to(v.p95_output_tokens);
}

void to_json(json& j, const ReplicaShape& v) {
    j = json{{"tp", v.tp}, {"pp", v.pp}};
}

void from_json(const json& j, ReplicaShape& v) {
    j.at("tp").get_to(v.tp);
    j.at("pp").get_to(v.pp);
}

void to_json(json& j, const ParallelismPlan& v) {
    j = json{{"replicas", v.replicas}, {"gpus_used", v.gpus_used}};
}

void from_json(const json& j, ParallelismPlan& v) {
    j.at("replicas").get_to(v.replicas);
    j.at("gpus_used").get_to(v.gpus_used);
}

void to_json(json& j, const RoutingThresholds& v) {
    j = json{{"thresholds", v.thresholds}};
}

void from_json(const json& j, RoutingThresholds& v) {
    j.at("thresholds").get_to(v.thresholds);
}

void to_json(json& j, const StageRecord& v) {
    j = json{{"output_tokens", v.output_tokens}, {"score", v.score}};
}

void from_json(const json& j, StageRecord& v) {
    j.at("output_tokens").get_to(v.output_tokens);
    j.at("score").get_to(v.score);
}

void to_json(json& j, const TraceRecord& v) {
    j = json{{"arrival_s", v.arrival_s},
             {"input_tokens", v.input_tokens},
             {"per_stage", v.per_stage}};
}

void from_json(const json& j, TraceRecord& v) {
    j.at("arrival_s").get_to(v.arrival_s);
    j.at("input_tokens").get_to(v.input_tokens);
    j.at("per_stage").get_to(v.per_stage);
}

void to_json(json& j, const CascadePlan& v) {
    json plans = json::array();
    for (const auto& p : v.plans) {
        if (p) plans.push_back(*p);
        else plans.push_back(nullptr);
    }
    j = json{{"allocations", v.allocations},
             {"plans", std::move(plans)},
             {"thresholds", v.thresholds},
             {"predicted_max_p95_s", v.predicted_max_p95_s},
             {"predicted_quality", v.predicted_quality},
             {"processing_ratios", v.processing_ratios}};
}

void from_json(const json& j, CascadePlan& v) {
    j.at("allocations").get_to(v.allocations);
    v.plans.clear();
    for (const auto& p : j.at("plans")) {
        if (p.is_null()) v.plans.push_back(std::nullopt);
        else v.plans.push_back(p.get<ParallelismPlan>());
    }
    j.at("thresholds").get_to(v.thresholds);
    j.at("predicted_max_p95_s").get_to(v.predicted_max_p95_s);
    j.at("predicted_quality").get_to(v.predicted_quality);
    j.at("processing_ratios").get_to(v.processing_ratios);
}

void to_json(json& j, const ObjectivePoint& v) {
    j = json{{"latency_s", v.latency_s},
             {"quality", v.quality},
             {"thresholds", v.thresholds},
             {"plan_ref", v.plan_ref}};
}

void from_json(const json& j, ObjectivePoint& v) {
    j.at("latency_s").get_to(v.latency_s);
    j.at("quality").get_to(v.quality);
    j.at("thresholds").get_to(v.thresholds);
    j.at("plan_ref").get_to(v.plan_ref);
}

// ---------------------------------------------------------------------------
// Trace IO

std::vector<TraceRecord> read_trace_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CascadeError(Errc::io_error, "cannot open trace file: " + path);
    std::vector<TraceRecord> trace;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        TraceRecord rec;
        try {
            rec = json::parse(line).get<TraceRecord>();
        } catch (const json::exception& e) {
            throw CascadeError(Errc::invalid_input,
                               path + ":" + std::to_string(lineno) +
                                   ": bad trace record: " + e.what());
        }
        require_valid(rec, trace.empty() ? -1
                                         : static_cast<int>(trace.front().per_stage.size()));
        if (!trace.empty() && rec.arrival_s < trace.back().arrival_s)
            throw CascadeError(Errc::invalid_input,
                               path + ":" + std::to_string(lineno) +
                                   ": arrival times must be non-decreasing");
        trace.push_back(std::move(rec));
    }
    return trace;
}

void write_trace_jsonl(const std::string& path,
                       const std::vector<TraceRecord>& trace) {
    std::ofstream out(path);
    if (!out) throw CascadeError(Errc::io_error, "cannot write trace file: " + path);
    for (const auto& rec : trace) out << json(rec).dump() << "\n";
}

double overall_arrival_rate(const std::vector<TraceRecord>& trace) {
    if (trace.size() < 2) return 0.0;
    double span = trace.back().arrival_s - trace.front().arrival_s;
    if (span <= 0.0) return 0.0;
    return static_cast<double>(trace.size()) / span;
}

}  // namespace cascade
