// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#include "cascade/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cascade/innerplan.hpp"
#include "cascade/routing.hpp"
#include "cascade/util.hpp"

namespace cascade::cli {

using nlohmann::json;
namespace fs = std::filesystem;

void to_json(json& j, const DriftPolicy& v) {
    j = json{{"window_requests", v.window_requests},
             {"window_interval_s", v.window_interval_s},
             {"rel_tolerance", v.rel_tolerance}};
}

void from_json(const json& j, DriftPolicy& v) {
    DriftPolicy defaults;
    v.window_requests = j.value("window_requests", defaults.window_requests);
    v.window_interval_s = j.value("window_interval_s", defaults.window_interval_s);
    v.rel_tolerance = j.value("rel_tolerance", defaults.rel_tolerance);
}

void require_valid(const DriftPolicy& p) {
    std::vector<std::string> problems;
    if (p.window_requests <= 0) problems.push_back("window_requests must be positive");
    if (p.window_interval_s <= 0)
        problems.push_back("window_interval_s must be positive");
    if (!(p.rel_tolerance > 0.0 && p.rel_tolerance < 1.0))
        problems.push_back("rel_tolerance must be in (0,1)");
    if (!problems.empty()) {
        std::ostringstream msg;
        msg << "invalid DriftPolicy:";
        for (const auto& s : problems) msg << " " << s << ";";
        throw CascadeError(Errc::invalid_input, msg.str());
    }
}

void to_json(json& j, const PlannerConfig& v) {
    j = json{{"hardware", v.hardware},
             {"models", v.models},
             {"cost_model", v.cost_model},
             {"sweep", v.sweep},
             {"drift", v.drift}};
}

void from_json(const json& j, PlannerConfig& v) {
    j.at("hardware").get_to(v.hardware);
    j.at("models").get_to(v.models);
    if (j.contains("cost_model")) j.at("cost_model").get_to(v.cost_model);
    if (j.contains("sweep")) j.at("sweep").get_to(v.sweep);
    if (j.contains("drift")) j.at("drift").get_to(v.drift);
}

PlannerConfig load_planner_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CascadeError(Errc::io_error, "cannot open config: " + path);
    PlannerConfig cfg;
    try {
        json::parse(in).get_to(cfg);
    } catch (const json::exception& e) {
        throw CascadeError(Errc::invalid_input, path + ": bad config: " + e.what());
    }
    require_valid(cfg.hardware);
    require_valid(cfg.models);
    costmodel::require_valid(cfg.cost_model);
    require_valid(cfg.drift);
    for (auto& m : cfg.models)
        m.min_gpus = costmodel::min_gpus_required(m, cfg.hardware, cfg.cost_model);
    return cfg;
}

void to_json(json& j, const DriftBaseline& v) {
    j = json{{"arrival_rate", v.arrival_rate},
             {"mean_input_tokens", v.mean_input_tokens},
             {"mean_output_tokens", v.mean_output_tokens},
             {"stage1_accept_rate", v.stage1_accept_rate},
             {"h1", v.h1 ? json(*v.h1) : json(nullptr)}};
}

void from_json(const json& j, DriftBaseline& v) {
    j.at("arrival_rate").get_to(v.arrival_rate);
    j.at("mean_input_tokens").get_to(v.mean_input_tokens);
    j.at("mean_output_tokens").get_to(v.mean_output_tokens);
    j.at("stage1_accept_rate").get_to(v.stage1_accept_rate);
    if (j.contains("h1") && !j.at("h1").is_null()) v.h1 = j.at("h1").get<double>();
    else v.h1 = std::nullopt;
}

namespace {

DriftBaseline stats_of_records(const std::vector<TraceRecord>& records,
                               std::optional<double> h1, double arrival_rate) {
    DriftBaseline b;
    b.arrival_rate = arrival_rate;
    b.h1 = h1;
    if (records.empty()) return b;
    double in_sum = 0, out_sum = 0;
    std::size_t accepted = 0;
    for (const auto& r : records) {
        in_sum += r.input_tokens;
        out_sum += r.per_stage.front().output_tokens;
        if (!h1 || r.per_stage.front().score >= *h1) ++accepted;
    }
    const auto n = static_cast<double>(records.size());
    b.mean_input_tokens = in_sum / n;
    b.mean_output_tokens = out_sum / n;
    b.stage1_accept_rate = accepted / n;
    return b;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

DriftBaseline compute_baseline(const std::vector<TraceRecord>& trace,
                               const CascadePlan& plan) {
    std::optional<double> h1;
    if (!plan.thresholds.thresholds.empty())
        h1 = plan.thresholds.thresholds.front();
    return stats_of_records(trace, h1, overall_arrival_rate(trace));
}

std::string write_output_file(const std::string& out_dir, const std::string& name,
                              const std::string& content) {
    fs::create_directories(out_dir);
    fs::path path = fs::path(out_dir) / name;
    std::ofstream out(path);
    if (!out)
        throw CascadeError(Errc::io_error, "cannot write " + path.string());
    out << content;
    return path.string();
}

// ---------------------------------------------------------------------------
// plan

PlanResult cmd_plan(const PlanArgs& args) {
    PlannerConfig cfg = load_planner_config(args.config_path);
    if (args.seed) cfg.cost_model.queueing_sim_seed = *args.seed;
    auto trace = read_trace_jsonl(args.trace_path);
    if (trace.empty())
        throw CascadeError(Errc::empty_trace, "planning trace is empty");

    outerplan::PlanRequirement req{args.min_quality, args.max_latency};
    if (req.min_quality.has_value() == req.max_latency.has_value())
        throw CascadeError(Errc::invalid_input,
                           "exactly one of --min-quality/--max-latency required");

    PlanResult result;
    result.sweep = outerplan::sweep(trace, cfg.models, cfg.hardware,
                                    cfg.cost_model, cfg.hardware.gpu_count,
                                    cfg.sweep);
    result.plan = outerplan::select_plan(result.sweep.front, req);

    result.plan_path =
        write_output_file(args.out_dir, "plan.json", dump_json(result.plan));
    result.front_json_path = write_output_file(args.out_dir, "front.json",
                                               dump_json(result.sweep.front));
    result.front_csv_path = write_output_file(
        args.out_dir, "front.csv", outerplan::front_to_csv(result.sweep.front));
    result.sweep_path =
        write_output_file(args.out_dir, "sweep.json", dump_json(result.sweep));
    result.baseline_path =
        write_output_file(args.out_dir, "baseline_stats.json",
                          dump_json(compute_baseline(trace, result.plan)));
    return result;
}

// ---------------------------------------------------------------------------
// simulate

SimulateResult cmd_simulate(const SimulateArgs& args) {
    PlannerConfig cfg = load_planner_config(args.config_path);
    std::ifstream plan_in(args.plan_path);
    if (!plan_in)
        throw CascadeError(Errc::io_error, "cannot open plan: " + args.plan_path);
    CascadePlan plan;
    try {
        json::parse(plan_in).get_to(plan);
    } catch (const json::exception& e) {
        throw CascadeError(Errc::invalid_input,
                           args.plan_path + ": bad plan: " + e.what());
    }
    auto trace = read_trace_jsonl(args.trace_path);

    sim::SimConfig sim_cfg;
    sim_cfg.seed = args.seed;
    sim_cfg.slo_base_s = args.slo_base_s;
    sim_cfg.warmup_fraction = args.warmup_fraction;
    if (!args.scales.empty()) sim_cfg.slo_scales = args.scales;

    SimulateResult result;
    result.report = sim::run(plan, trace, cfg.models, cfg.hardware,
                             cfg.cost_model, sim_cfg);
    result.report_path =
        write_output_file(args.out_dir, "report.json", dump_json(result.report));
    result.attainment_csv_path =
        write_output_file(args.out_dir, "attainment.csv",
                          sim::attainment_to_csv(result.report.attainment));
    return result;
}

// ---------------------------------------------------------------------------
// drift

DriftResult cmd_drift(const DriftArgs& args) {
    PlannerConfig cfg = load_planner_config(args.config_path);
    std::ifstream base_in(args.baseline_path);
    if (!base_in)
        throw CascadeError(Errc::io_error,
                           "cannot open baseline: " + args.baseline_path);
    DriftBaseline baseline;
    try {
        json::parse(base_in).get_to(baseline);
    } catch (const json::exception& e) {
        throw CascadeError(Errc::invalid_input,
                           args.baseline_path + ": bad baseline: " + e.what());
    }
    auto stream = read_trace_jsonl(args.trace_path);
    if (stream.empty())
        throw CascadeError(Errc::empty_trace, "drift stream is empty");
    const DriftPolicy& policy = cfg.drift;

    const double t0 = stream.front().arrival_s;
    const double stream_end = stream.back().arrival_s;
    const double interval = policy.window_interval_s;

    DriftResult result;
    std::vector<TraceRecord> last_window_sample;
    std::size_t pos = 0;
    for (int k = 0; pos < stream.size(); ++k) {
        const double start = t0 + k * interval;
        const double end = start + interval;
        std::vector<TraceRecord> window;
        while (pos < stream.size() && stream[pos].arrival_s < end) {
            window.push_back(stream[pos]);
            ++pos;
        }
        const double span = std::min(interval, stream_end - start);
        if (window.empty() || span <= 0.0) continue;

        std::vector<TraceRecord> sample(
            window.begin(),
            window.begin() + std::min<std::size_t>(window.size(),
                                                   policy.window_requests));
        const double rate = static_cast<double>(window.size()) / span;
        DriftWindowReport rep;
        rep.start_s = start;
        rep.span_s = span;
        rep.requests = static_cast<int>(window.size());
        rep.sampled = static_cast<int>(sample.size());
        rep.stats = stats_of_records(sample, baseline.h1, rate);

        auto check = [&](const char* name, double base, double cur) {
            json dev;
            bool drifted;
            if (base != 0.0) {
                const double d = std::abs(cur - base) / std::abs(base);
                dev = d;
                drifted = d > policy.rel_tolerance;
            } else {
                dev = nullptr;
                drifted = cur != 0.0;
            }
            rep.deviations[name] = dev;
            if (drifted) rep.drifted_stats.push_back(name);
        };
        rep.deviations = json::object();
        check("arrival_rate", baseline.arrival_rate, rep.stats.arrival_rate);
        check("mean_input_tokens", baseline.mean_input_tokens,
              rep.stats.mean_input_tokens);
        check("mean_output_tokens", baseline.mean_output_tokens,
              rep.stats.mean_output_tokens);
        check("stage1_accept_rate", baseline.stage1_accept_rate,
              rep.stats.stage1_accept_rate);
        rep.any_drift = !rep.drifted_stats.empty();
        result.drift_detected = result.drift_detected || rep.any_drift;
        last_window_sample = std::move(sample);
        result.windows.push_back(std::move(rep));
    }

    if (args.replan && result.drift_detected) {
        if (args.min_quality.has_value() == args.max_latency.has_value())
            throw CascadeError(Errc::invalid_input,
                               "replan requires exactly one of "
                               "--min-quality/--max-latency");
        fs::create_directories(args.out_dir);
        const std::string window_path =
            (fs::path(args.out_dir) / "replan_window.jsonl").string();
        write_trace_jsonl(window_path, last_window_sample);
        PlanArgs plan_args;
        plan_args.config_path = args.config_path;
        plan_args.trace_path = window_path;
        plan_args.out_dir = args.out_dir;
        plan_args.min_quality = args.min_quality;
        plan_args.max_latency = args.max_latency;
        plan_args.seed = args.seed;
        result.replan = cmd_plan(plan_args);
        result.replanned = true;
    }

    json jwindows = json::array();
    for (const auto& w : result.windows) {
        jwindows.push_back(json{{"start_s", w.start_s},
                                {"span_s", w.span_s},
                                {"requests", w.requests},
                                {"sampled", w.sampled},
                                {"stats", w.stats},
                                {"deviations", w.deviations},
                                {"drifted_stats", w.drifted_stats},
                                {"any_drift", w.any_drift}});
    }
    // Model reloading on re-plan is out of scope; its cost is recorded as an
    // informational constant only.
    json report{{"policy", policy},
                {"baseline", baseline},
                {"windows", std::move(jwindows)},
                {"drift_detected", result.drift_detected},
                {"replanned", result.replanned},
                {"assumed_reload_s", 180.0}};
    result.report_path =
        write_output_file(args.out_dir, "drift_report.json", dump_json(report));
    return result;
}

// ---------------------------------------------------------------------------
// gen-trace

void from_json(const json& j, DistSpec& v) {
    j.at("dist").get_to(v.dist);
    v.value = j.value("value", 0.0);
    v.mean = j.value("mean", 0.0);
    v.std = j.value("std", 0.0);
    v.has_min = j.contains("min");
    v.has_max = j.contains("max");
    v.min = j.value("min", 0.0);
    v.max = j.value("max", 0.0);
    v.values = j.value("values", std::vector<double>{});
    v.weights = j.value("weights", std::vector<double>{});
}

void from_json(const json& j, TraceGenSpec& v) {
    j.at("count").get_to(v.count);
    j.at("arrival_rate").get_to(v.arrival_rate);
    j.at("input_tokens").get_to(v.input_tokens);
    v.stages.clear();
    for (const auto& s : j.at("stages")) {
        TraceGenStage stage;
        s.at("output_tokens").get_to(stage.output_tokens);
        s.at("score").get_to(stage.score);
        v.stages.push_back(std::move(stage));
    }
}

namespace {

void validate_dist(const DistSpec& d) {
    if (d.dist == "fixed" || d.dist == "uniform" || d.dist == "normal") return;
    if (d.dist == "exponential") {
        if (d.mean < 0)
            throw CascadeError(Errc::invalid_input, "exponential mean must be >= 0");
        return;
    }
    if (d.dist == "choice") {
        if (d.values.empty())
            throw CascadeError(Errc::invalid_input, "choice needs values");
        if (!d.weights.empty() && d.weights.size() != d.values.size())
            throw CascadeError(Errc::invalid_input,
                               "choice weights length != values length");
        for (double w : d.weights)
            if (w < 0)
                throw CascadeError(Errc::invalid_input,
                                   "choice weights must be >= 0");
        return;
    }
    throw CascadeError(Errc::invalid_input, "unknown distribution: " + d.dist);
}

double sample_dist(const DistSpec& d, util::Rng& rng) {
    double x;
    if (d.dist == "fixed") {
        x = d.value;
    } else if (d.dist == "uniform") {
        x = rng.uniform(d.min, d.max);
    } else if (d.dist == "exponential") {
        x = rng.exponential_mean(d.mean);
    } else if (d.dist == "normal") {
        x = rng.normal(d.mean, d.std);
    } else {  // choice
        double total = 0;
        for (std::size_t i = 0; i < d.values.size(); ++i)
            total += d.weights.empty() ? 1.0 : d.weights[i];
        double u = rng.uniform() * total;
        x = d.values.back();
        for (std::size_t i = 0; i < d.values.size(); ++i) {
            u -= d.weights.empty() ? 1.0 : d.weights[i];
            if (u < 0) {
                x = d.values[i];
                break;
            }
        }
    }
    if (d.has_min) x = std::max(x, d.min);
    if (d.has_max) x = std::min(x, d.max);
    return x;
}

double sample_tokens(const DistSpec& d, util::Rng& rng) {
    return std::max(0.0, std::round(sample_dist(d, rng)));
}

double sample_score(const DistSpec& d, util::Rng& rng) {
    return std::clamp(sample_dist(d, rng), 0.0, kScoreMax);
}

}  // namespace

std::vector<TraceRecord> generate_trace(const TraceGenSpec& spec,
                                        std::uint64_t seed) {
    if (spec.count < 0)
        throw CascadeError(Errc::invalid_input, "trace count must be >= 0");
    if (spec.arrival_rate <= 0)
        throw CascadeError(Errc::invalid_input, "arrival_rate must be positive");
    if (spec.stages.empty())
        throw CascadeError(Errc::invalid_input, "trace spec needs stages");
    validate_dist(spec.input_tokens);
    for (const auto& s : spec.stages) {
        validate_dist(s.output_tokens);
        validate_dist(s.score);
    }

    util::Rng rng(seed);
    std::vector<TraceRecord> trace;
    trace.reserve(spec.count);
    double t = 0;
    for (int i = 0; i < spec.count; ++i) {
        TraceRecord rec;
        t += rng.exponential_mean(1.0) / spec.arrival_rate;
        rec.arrival_s = t;
        rec.input_tokens = sample_tokens(spec.input_tokens, rng);
        for (const auto& s : spec.stages) {
            StageRecord sr;
            sr.output_tokens = sample_tokens(s.output_tokens, rng);
            sr.score = sample_score(s.score, rng);
            rec.per_stage.push_back(sr);
        }
        trace.push_back(std::move(rec));
    }
    return trace;
}

GenTraceResult cmd_gen_trace(const GenTraceArgs& args) {
    std::ifstream in(args.spec_path);
    if (!in)
        throw CascadeError(Errc::io_error,
                           "cannot open trace spec: " + args.spec_path);
    TraceGenSpec spec;
    try {
        json::parse(in).get_to(spec);
    } catch (const json::exception& e) {
        throw CascadeError(Errc::invalid_input,
                           args.spec_path + ": bad trace spec: " + e.what());
    }
    if (args.count_override) spec.count = *args.count_override;
    auto trace = generate_trace(spec, args.seed);
    fs::create_directories(args.out_dir);
    GenTraceResult result;
    result.trace_path = (fs::path(args.out_dir) / "trace.jsonl").string();
    result.count = static_cast<int>(trace.size());
    write_trace_jsonl(result.trace_path, trace);
    return result;
}

}  // namespace cascade::cli
