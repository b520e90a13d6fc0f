// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#include "cascade/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include "cascade/util.hpp"

namespace cascade::sim {

using nlohmann::json;

void to_json(json& j, const SimConfig& v) {
    j = json{{"seed", v.seed},
             {"slo_base_s", v.slo_base_s},
             {"slo_scales", v.slo_scales},
             {"warmup_fraction", v.warmup_fraction}};
}

void from_json(const json& j, SimConfig& v) {
    SimConfig defaults;
    v.seed = j.value("seed", defaults.seed);
    v.slo_base_s = j.value("slo_base_s", defaults.slo_base_s);
    v.slo_scales = j.value("slo_scales", defaults.slo_scales);
    v.warmup_fraction = j.value("warmup_fraction", defaults.warmup_fraction);
}

void to_json(json& j, const SimReport& v) {
    json reqs = json::array();
    for (const auto& r : v.per_request)
        reqs.push_back(json{{"end_to_end_s", r.end_to_end_s},
                            {"accept_stage", r.accept_stage}});
    json attain = json::array();
    for (const auto& a : v.attainment)
        attain.push_back(json{{"scale", a.scale}, {"fraction", a.fraction}});
    j = json{{"per_request", std::move(reqs)},
             {"p95_s", v.p95_s},
             {"throughput_rps", v.throughput_rps},
             {"attainment", std::move(attain)},
             {"min_scale_95",
              v.min_scale_95 ? json(*v.min_scale_95) : json(nullptr)},
             {"slo_base_s", v.slo_base_s},
             {"unstable_stages", v.unstable_stages}};
}

void from_json(const json& j, SimReport& v) {
    v.per_request.clear();
    for (const auto& r : j.at("per_request"))
        v.per_request.push_back(
            {r.at("end_to_end_s").get<double>(), r.at("accept_stage").get<int>()});
    j.at("p95_s").get_to(v.p95_s);
    j.at("throughput_rps").get_to(v.throughput_rps);
    v.attainment.clear();
    for (const auto& a : j.at("attainment"))
        v.attainment.push_back(
            {a.at("scale").get<double>(), a.at("fraction").get<double>()});
    if (j.at("min_scale_95").is_null()) v.min_scale_95 = std::nullopt;
    else v.min_scale_95 = j.at("min_scale_95").get<double>();
    j.at("slo_base_s").get_to(v.slo_base_s);
    j.at("unstable_stages").get_to(v.unstable_stages);
}

void to_json(json& j, const CompareResult& v) {
    json rows = json::array();
    for (const auto& r : v.rows)
        rows.push_back(json{{"p95_s", r.p95_s},
                            {"throughput_rps", r.throughput_rps},
                            {"min_scale_95",
                             r.min_scale_95 ? json(*r.min_scale_95) : json(nullptr)}});
    j = json{{"rows", std::move(rows)}, {"reports", json::array()}};
    for (const auto& rep : v.reports) j["reports"].push_back(rep);
}

namespace {

struct ReplicaProfile {
    double prefill_per_token = 0;  // bubble-scaled compute cost per input token
    double prefill_fixed = 0;      // bubble-scaled pipeline communication
    double decode_per_token = 0;
};

struct StageState {
    bool deployed = false;
    std::vector<ReplicaProfile> replicas;
    std::vector<double> avail;  // per-replica next-free time
    // instability bookkeeping
    std::vector<double> waits;
    double service_sum = 0;
    std::size_t served = 0;
};

double service_of(const ReplicaProfile& p, const TraceRecord& rec,
                  std::size_t stage) {
    return p.prefill_per_token * rec.input_tokens + p.prefill_fixed +
           rec.per_stage[stage].output_tokens * p.decode_per_token;
}

struct SimContext {
    std::vector<StageState> stages;
    std::vector<int> next_deployed;  // per stage: next deployed stage or -1
    int last_deployed = -1;
    const CascadePlan* plan = nullptr;
};

SimContext build_context(const CascadePlan& plan,
                         const std::vector<ModelSpec>& models,
                         const HardwareSpec& hw,
                         const costmodel::CostModelParams& params) {
    SimContext ctx;
    ctx.plan = &plan;
    const std::size_t c = models.size();
    ctx.stages.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        if (!plan.plans[i]) continue;
        auto& st = ctx.stages[i];
        st.deployed = true;
        ctx.last_deployed = static_cast<int>(i);
        for (const auto& shape : plan.plans[i]->replicas) {
            ReplicaProfile rp;
            const double bubble =
                1.0 + params.pipeline_bubble_factor * (shape.pp - 1);
            rp.prefill_per_token =
                2.0 * models[i].param_count /
                (shape.gpus() * hw.flops_per_gpu * params.prefill_efficiency) *
                bubble;
            rp.prefill_fixed = shape.pp * params.comm_overhead_per_stage * bubble;
            rp.decode_per_token =
                models[i].weight_bytes() / (shape.tp * hw.mem_bandwidth_per_gpu *
                                            params.decode_bw_efficiency) +
                shape.pp * params.comm_overhead_per_stage;
            st.replicas.push_back(rp);
        }
        st.avail.assign(st.replicas.size(), 0.0);
    }
    ctx.next_deployed.assign(c, -1);
    int next = -1;
    for (int i = static_cast<int>(c) - 1; i >= 0; --i) {
        ctx.next_deployed[i] = next;
        if (ctx.stages[i].deployed) next = i;
    }
    return ctx;
}

/// True when the request is accepted at this deployed stage.
bool accepts(const SimContext& ctx, const TraceRecord& rec, int stage) {
    if (stage == ctx.last_deployed) return true;
    return rec.per_stage[stage].score >=
           ctx.plan->thresholds.thresholds[stage];
}

int first_deployed(const SimContext& ctx) {
    for (std::size_t i = 0; i < ctx.stages.size(); ++i)
        if (ctx.stages[i].deployed) return static_cast<int>(i);
    return -1;
}

/// Mean no-contention single-request latency over every request's accept path.
double dry_run_base(const SimContext& ctx, const std::vector<TraceRecord>& trace) {
    const int entry = first_deployed(ctx);
    double sum = 0.0;
    for (const auto& rec : trace) {
        double latency = 0.0;
        for (int s = entry; s >= 0; s = ctx.next_deployed[s]) {
            latency += service_of(ctx.stages[s].replicas.front(), rec, s);
            if (accepts(ctx, rec, s)) break;
        }
        sum += latency;
    }
    return sum / static_cast<double>(trace.size());
}

}  // namespace

SimReport run(const CascadePlan& plan, const std::vector<TraceRecord>& trace,
              const std::vector<ModelSpec>& models, const HardwareSpec& hw,
              const costmodel::CostModelParams& params, const SimConfig& cfg) {
    if (trace.empty()) throw CascadeError(Errc::empty_trace, "run: empty trace");
    auto report_problems = validate_plan(plan, hw, models);
    if (!report_problems.empty()) {
        std::ostringstream msg;
        msg << "run: invalid plan:";
        for (const auto& p : report_problems) msg << " " << p << ";";
        throw CascadeError(Errc::invalid_input, msg.str());
    }
    if (!(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0))
        throw CascadeError(Errc::invalid_input, "warmup_fraction outside [0,1)");
    for (std::size_t i = 1; i < cfg.slo_scales.size(); ++i)
        if (cfg.slo_scales[i] <= cfg.slo_scales[i - 1])
            throw CascadeError(Errc::invalid_input,
                               "slo_scales must be sorted ascending");
    for (double s : cfg.slo_scales)
        if (s <= 0)
            throw CascadeError(Errc::invalid_input, "slo_scales must be positive");
    for (const auto& rec : trace)
        if (rec.per_stage.size() != models.size())
            throw CascadeError(Errc::invalid_input,
                               "trace record stage count != C");

    SimContext ctx = build_context(plan, models, hw, params);
    const int entry = first_deployed(ctx);
    if (entry < 0)
        throw CascadeError(Errc::no_deployed_stage, "plan deploys no stage");

    SimReport report;
    report.per_request.resize(trace.size());
    report.slo_base_s = cfg.slo_base_s > 0 ? cfg.slo_base_s
                                           : dry_run_base(ctx, trace);

    // Arrival events ordered by (time, sequence); escalations are pushed with
    // fresh sequence numbers so ordering is total and deterministic.
    struct Event {
        double time;
        std::uint64_t seq;
        std::uint32_t request;
        int stage;
    };
    auto later = [](const Event& a, const Event& b) {
        if (a.time != b.time) return a.time > b.time;
        return a.seq > b.seq;
    };
    std::priority_queue<Event, std::vector<Event>, decltype(later)> events(later);
    std::uint64_t seq = 0;
    for (std::uint32_t r = 0; r < trace.size(); ++r)
        events.push({trace[r].arrival_s, seq++, r, entry});

    while (!events.empty()) {
        const Event ev = events.top();
        events.pop();
        auto& st = ctx.stages[ev.stage];
        // Join shortest expected work: least remaining backlog, index tie-break.
        std::size_t best = 0;
        double best_work = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < st.avail.size(); ++j) {
            const double work = std::max(0.0, st.avail[j] - ev.time);
            if (work < best_work) {
                best_work = work;
                best = j;
                if (work == 0.0) break;
            }
        }
        const TraceRecord& rec = trace[ev.request];
        const double start = std::max(ev.time, st.avail[best]);
        const double service = service_of(st.replicas[best], rec, ev.stage);
        const double fin = start + service;
        st.avail[best] = fin;
        st.waits.push_back(start - ev.time);
        st.service_sum += service;
        st.served += 1;

        if (accepts(ctx, rec, ev.stage)) {
            report.per_request[ev.request] = {fin - rec.arrival_s, ev.stage + 1};
        } else {
            events.push({fin, seq++, ev.request, ctx.next_deployed[ev.stage]});
        }
    }

    // Metrics over non-warmup requests.
    const std::size_t n = trace.size();
    const auto warmup =
        static_cast<std::size_t>(cfg.warmup_fraction * static_cast<double>(n));
    std::vector<double> e2e;
    e2e.reserve(n - warmup);
    double last_completion = 0.0;
    for (std::size_t r = warmup; r < n; ++r) {
        e2e.push_back(report.per_request[r].end_to_end_s);
        last_completion = std::max(
            last_completion, trace[r].arrival_s + report.per_request[r].end_to_end_s);
    }
    if (!e2e.empty()) {
        report.p95_s = util::quantile(e2e, 0.95);
        const double span = last_completion - trace[warmup].arrival_s;
        report.throughput_rps =
            span > 0 ? static_cast<double>(e2e.size()) / span : 0.0;
    }
    report.attainment = attainment_curve(report, cfg);
    for (const auto& a : report.attainment)
        if (!report.min_scale_95 && a.fraction >= 0.95) report.min_scale_95 = a.scale;

    // Queue-growth warning: second-half waits far above first-half waits and
    // above the stage's mean service time.
    for (std::size_t i = 0; i < ctx.stages.size(); ++i) {
        const auto& st = ctx.stages[i];
        if (st.waits.size() < 8) continue;
        const std::size_t half = st.waits.size() / 2;
        double w1 = 0, w2 = 0;
        for (std::size_t k = 0; k < half; ++k) w1 += st.waits[k];
        for (std::size_t k = half; k < st.waits.size(); ++k) w2 += st.waits[k];
        w1 /= static_cast<double>(half);
        w2 /= static_cast<double>(st.waits.size() - half);
        const double mean_service =
            st.service_sum / static_cast<double>(st.served);
        if (w2 > 2.0 * w1 && w2 > mean_service)
            report.unstable_stages.push_back(static_cast<int>(i) + 1);
    }
    return report;
}

std::vector<AttainmentPoint> attainment_curve(const SimReport& report,
                                              const SimConfig& cfg) {
    const std::size_t n = report.per_request.size();
    const auto warmup =
        static_cast<std::size_t>(cfg.warmup_fraction * static_cast<double>(n));
    std::vector<AttainmentPoint> curve;
    const double considered = static_cast<double>(n - warmup);
    for (double scale : cfg.slo_scales) {
        std::size_t ok = 0;
        for (std::size_t r = warmup; r < n; ++r)
            if (report.per_request[r].end_to_end_s <= scale * report.slo_base_s)
                ++ok;
        curve.push_back({scale, considered > 0 ? ok / considered : 1.0});
    }
    return curve;
}

CompareResult compare(const std::vector<CascadePlan>& plans,
                      const std::vector<TraceRecord>& trace,
                      const std::vector<ModelSpec>& models, const HardwareSpec& hw,
                      const costmodel::CostModelParams& params,
                      const SimConfig& cfg) {
    if (plans.size() < 2)
        throw CascadeError(Errc::invalid_input, "compare requires >= 2 plans");
    CompareResult result;
    SimConfig shared = cfg;
    for (const auto& plan : plans) {
        SimReport rep = run(plan, trace, models, hw, params, shared);
        if (shared.slo_base_s <= 0) shared.slo_base_s = rep.slo_base_s;
        result.rows.push_back({rep.p95_s, rep.throughput_rps, rep.min_scale_95});
        result.reports.push_back(std::move(rep));
    }
    return result;
}

std::string attainment_to_csv(const std::vector<AttainmentPoint>& curve) {
    std::ostringstream out;
    out.precision(17);
    out << "scale,fraction\n";
    for (const auto& a : curve) out << a.scale << "," << a.fraction << "\n";
    return out.str();
}

}  // namespace cascade::sim
