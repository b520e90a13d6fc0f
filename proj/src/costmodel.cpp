// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#include "cascade/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "cascade/util.hpp"

namespace cascade::costmodel {

using nlohmann::json;

void to_json(json& j, const CostModelParams& v) {
    j = json{{"prefill_efficiency", v.prefill_efficiency},
             {"decode_bw_efficiency", v.decode_bw_efficiency},
             {"pipeline_bubble_factor", v.pipeline_bubble_factor},
             {"comm_overhead_per_stage", v.comm_overhead_per_stage},
             {"kv_memory_fraction", v.kv_memory_fraction},
             {"queueing_sim_requests", v.queueing_sim_requests},
             {"queueing_sim_seed", v.queueing_sim_seed}};
}

void from_json(const json& j, CostModelParams& v) {
    CostModelParams defaults;
    v.prefill_efficiency = j.value("prefill_efficiency", defaults.prefill_efficiency);
    v.decode_bw_efficiency =
        j.value("decode_bw_efficiency", defaults.decode_bw_efficiency);
    v.pipeline_bubble_factor =
        j.value("pipeline_bubble_factor", defaults.pipeline_bubble_factor);
    v.comm_overhead_per_stage =
        j.value("comm_overhead_per_stage", defaults.comm_overhead_per_stage);
    v.kv_memory_fraction = j.value("kv_memory_fraction", defaults.kv_memory_fraction);
    v.queueing_sim_requests =
        j.value("queueing_sim_requests", defaults.queueing_sim_requests);
    v.queueing_sim_seed = j.value("queueing_sim_seed", defaults.queueing_sim_seed);
}

void require_valid(const CostModelParams& p) {
    std::vector<std::string> problems;
    auto fraction = [&](double v, const char* name) {
        if (!(v > 0.0 && v <= 1.0))
            problems.push_back(std::string(name) + " must be in (0,1]");
    };
    fraction(p.prefill_efficiency, "prefill_efficiency");
    fraction(p.decode_bw_efficiency, "decode_bw_efficiency");
    fraction(p.kv_memory_fraction, "kv_memory_fraction");
    if (p.pipeline_bubble_factor < 0.0)
        problems.push_back("pipeline_bubble_factor must be >= 0");
    if (p.comm_overhead_per_stage < 0.0)
        problems.push_back("comm_overhead_per_stage must be >= 0");
    if (p.queueing_sim_requests <= 0)
        problems.push_back("queueing_sim_requests must be positive");
    if (!problems.empty()) {
        std::ostringstream msg;
        msg << "invalid CostModelParams:";
        for (const auto& s : problems) msg << " " << s << ";";
        throw CascadeError(Errc::invalid_input, msg.str());
    }
}

CostModelParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CascadeError(Errc::io_error, "cannot open params file: " + path);
    CostModelParams p;
    try {
        json::parse(in).get_to(p);
    } catch (const json::exception& e) {
        throw CascadeError(Errc::invalid_input,
                           path + ": bad cost model params: " + e.what());
    }
    require_valid(p);
    return p;
}

bool memory_feasible(const ReplicaShape& shape, const ModelSpec& model,
                     const HardwareSpec& hw, const CostModelParams& params,
                     double kv_tokens) {
    const double gpus = shape.gpus();
    const double weights = model.weight_bytes();
    if (weights / gpus > hw.mem_capacity_per_gpu) return false;
    const double kv_budget =
        params.kv_memory_fraction * (gpus * hw.mem_capacity_per_gpu - weights);
    return kv_budget >= model.kv_bytes_per_token * kv_tokens;
}

namespace {

bool shape_canonical_before(const ReplicaShape& a, const ReplicaShape& b) {
    if (a.gpus() != b.gpus()) return a.gpus() > b.gpus();
    return a.tp > b.tp;
}

std::vector<ReplicaShape> all_shape_candidates(const HardwareSpec& hw) {
    std::vector<ReplicaShape> shapes;
    for (int tp = 1; tp <= hw.gpus_per_node; tp *= 2)
        for (int pp = 1; pp <= kMaxPipelineParallel; ++pp)
            shapes.push_back({tp, pp});
    std::sort(shapes.begin(), shapes.end(), shape_canonical_before);
    return shapes;
}

}  // namespace

std::vector<ReplicaShape> legal_shapes(const ModelSpec& model,
                                       const HardwareSpec& hw,
                                       const CostModelParams& params,
                                       double kv_tokens) {
    std::vector<ReplicaShape> out;
    for (const auto& s : all_shape_candidates(hw))
        if (memory_feasible(s, model, hw, params, kv_tokens)) out.push_back(s);
    return out;
}

int min_gpus_required(const ModelSpec& model, const HardwareSpec& hw,
                      const CostModelParams& params) {
    auto shapes = legal_shapes(model, hw, params);
    int best = 0;
    for (const auto& s : shapes)
        if (best == 0 || s.gpus() < best) best = s.gpus();
    if (best == 0)
        throw CascadeError(Errc::infeasible,
                           "model " + model.id + " fits on no feasible replica shape");
    return best;
}

namespace {

void enumerate_multisets(const std::vector<ReplicaShape>& shapes, int budget,
                         std::size_t idx, std::vector<int>& counts,
                         const std::function<void(const std::vector<int>&, int)>& emit,
                         int used) {
    if (idx == shapes.size()) {
        if (used > 0) emit(counts, used);
        return;
    }
    const int size = shapes[idx].gpus();
    for (int k = 0; used + k * size <= budget; ++k) {
        counts[idx] = k;
        enumerate_multisets(shapes, budget, idx + 1, counts, emit, used + k * size);
    }
    counts[idx] = 0;
}

}  // namespace

std::vector<ParallelismPlan> enumerate_plans(int budget, const ModelSpec& model,
                                             const HardwareSpec& hw,
                                             const CostModelParams& params) {
    if (budget < 1)
        throw CascadeError(Errc::invalid_input, "enumerate_plans requires budget >= 1");
    auto shapes = legal_shapes(model, hw, params);
    std::vector<ParallelismPlan> plans;
    std::vector<int> counts(shapes.size(), 0);
    enumerate_multisets(shapes, budget, 0, counts,
                        [&](const std::vector<int>& c, int used) {
                            ParallelismPlan p;
                            p.gpus_used = used;
                            for (std::size_t i = 0; i < shapes.size(); ++i)
                                for (int k = 0; k < c[i]; ++k)
                                    p.replicas.push_back(shapes[i]);
                            plans.push_back(std::move(p));
                        },
                        0);
    std::sort(plans.begin(), plans.end(),
              [](const ParallelismPlan& a, const ParallelismPlan& b) {
                  if (a.gpus_used != b.gpus_used) return a.gpus_used < b.gpus_used;
                  return plan_less(a, b);
              });
    return plans;
}

ServiceTime service_time(const ReplicaShape& shape, const ModelSpec& model,
                         const WorkloadStats& w, const HardwareSpec& hw,
                         const CostModelParams& params) {
    if (!memory_feasible(shape, model, hw, params))
        throw CascadeError(Errc::invalid_input,
                           "service_time called on memory-infeasible shape");
    const double gpus = shape.gpus();
    const double bubble = 1.0 + params.pipeline_bubble_factor * (shape.pp - 1);
    ServiceTime st;
    st.prefill_s = (2.0 * model.param_count * w.mean_input_tokens /
                        (gpus * hw.flops_per_gpu * params.prefill_efficiency) +
                    shape.pp * params.comm_overhead_per_stage) *
                   bubble;
    st.decode_per_token_s =
        model.weight_bytes() /
            (shape.tp * hw.mem_bandwidth_per_gpu * params.decode_bw_efficiency) +
        shape.pp * params.comm_overhead_per_stage;
    return st;
}

// ---------------------------------------------------------------------------
// Queueing estimator

StageEvaluator::StageEvaluator(HardwareSpec hw, CostModelParams params)
    : hw_(std::move(hw)), params_(std::move(params)) {
    cascade::require_valid(hw_);
    require_valid(params_);
}

const StageEvaluator::PlanSet& StageEvaluator::plan_set(const ModelSpec& model,
                                                        int budget) {
    std::ostringstream key;
    key.precision(17);
    key << model.id << "|" << model.param_count << "|" << model.bytes_per_param
        << "|" << model.kv_bytes_per_token << "|" << budget;
    auto it = plan_cache_.find(key.str());
    if (it != plan_cache_.end()) return it->second;

    PlanSet set;
    set.shapes = legal_shapes(model, hw_, params_);
    std::vector<int> counts(set.shapes.size(), 0);
    enumerate_multisets(set.shapes, budget, 0, counts,
                        [&](const std::vector<int>& c, int used) {
                            CompactPlan p;
                            p.gpus = used;
                            for (std::size_t i = 0; i < c.size(); ++i)
                                if (c[i] > 0)
                                    p.parts.emplace_back(static_cast<std::uint16_t>(i),
                                                         static_cast<std::uint16_t>(c[i]));
                            set.plans.push_back(std::move(p));
                        },
                        0);
    return plan_cache_.emplace(key.str(), std::move(set)).first->second;
}

namespace {

struct PlanScore {
    double latency = kInfeasible;
    int plan_idx = -1;
};

struct SimWorkspace {
    std::vector<int> replica_shape;       // per-replica shape index
    std::vector<double> avail;            // per-replica next-free time
    std::vector<std::vector<double>> fifo;  // per-replica completion times
    std::vector<std::size_t> head;
    std::vector<double> sojourn;
};

/// FCFS join-shortest-queue simulation over dp dedicated replica queues.
/// Returns the nearest-rank p95 sojourn time.
double simulate_plan_p95(const std::vector<int>& replica_shape,
                         const std::vector<double>& prefill,
                         const std::vector<double>& decode,
                         const std::vector<double>& arrivals,
                         const std::vector<double>& outputs,
                         SimWorkspace& ws) {
    const std::size_t dp = replica_shape.size();
    const std::size_t n = arrivals.size();
    ws.avail.assign(dp, 0.0);
    if (ws.fifo.size() < dp) ws.fifo.resize(dp);
    ws.head.assign(dp, 0);
    for (std::size_t j = 0; j < dp; ++j) ws.fifo[j].clear();
    ws.sojourn.resize(n);

    for (std::size_t k = 0; k < n; ++k) {
        const double t = arrivals[k];
        std::size_t best = 0;
        std::size_t best_len = std::numeric_limits<std::size_t>::max();
        for (std::size_t j = 0; j < dp; ++j) {
            auto& q = ws.fifo[j];
            std::size_t h = ws.head[j];
            while (h < q.size() && q[h] <= t) ++h;
            ws.head[j] = h;
            const std::size_t len = q.size() - h;
            if (len < best_len) {
                best_len = len;
                best = j;
                if (len == 0) break;  // empty queue, lowest index wins
            }
        }
        const int s = replica_shape[best];
        const double start = std::max(t, ws.avail[best]);
        const double fin = start + prefill[s] + outputs[k] * decode[s];
        ws.avail[best] = fin;
        ws.fifo[best].push_back(fin);
        ws.sojourn[k] = fin - t;
    }

    auto& v = ws.sojourn;
    const auto rank = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(n)));
    const std::size_t idx = std::clamp<std::size_t>(rank, 1, n) - 1;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
    return v[idx];
}

}  // namespace

LatencyRow StageEvaluator::row(const ModelSpec& model, const WorkloadStats& w,
                               int max_budget) {
    cascade::require_valid(w);
    LatencyRow out;
    out.latency.assign(max_budget + 1, kInfeasible);
    out.plan.assign(max_budget + 1, std::nullopt);
    if (w.arrival_rate == 0.0) {
        std::fill(out.latency.begin(), out.latency.end(), 0.0);
        return out;
    }
    if (max_budget < 1) return out;

    const PlanSet& set = plan_set(model, max_budget);
    const std::size_t num_shapes = set.shapes.size();
    if (num_shapes == 0) return out;

    // Workload-aware shape feasibility (KV cache at p95 sequence length) and
    // per-shape service profiles.
    const double kv_tokens = w.p95_input_tokens + w.p95_output_tokens;
    std::vector<char> shape_ok(num_shapes, 0);
    std::vector<double> prefill(num_shapes, 0.0), decode(num_shapes, 0.0),
        mean_service(num_shapes, 0.0);
    const double clamped_mean_out = w.mean_output_tokens * kClampedExpMeanFactor;
    for (std::size_t s = 0; s < num_shapes; ++s) {
        if (!memory_feasible(set.shapes[s], model, hw_, params_, kv_tokens)) continue;
        shape_ok[s] = 1;
        ServiceTime st = service_time(set.shapes[s], model, w, hw_, params_);
        prefill[s] = st.prefill_s;
        decode[s] = st.decode_per_token_s;
        mean_service[s] = st.prefill_s + clamped_mean_out * st.decode_per_token_s;
    }

    // Common random numbers: one sampled request stream per (workload, seed),
    // shared by every plan. Interarrivals scale with 1/rate so raising the
    // rate compresses the same stream.
    const auto n_requests = static_cast<std::size_t>(params_.queueing_sim_requests);
    std::vector<double> arrivals(n_requests), outputs(n_requests);
    {
        util::Rng rng(params_.queueing_sim_seed);
        double t = 0.0;
        const double cap = 4.0 * w.mean_output_tokens;
        for (std::size_t k = 0; k < n_requests; ++k) {
            t += rng.exponential_mean(1.0) / w.arrival_rate;
            arrivals[k] = t;
            outputs[k] = std::min(rng.exponential_mean(w.mean_output_tokens), cap);
        }
    }

    // Best candidate per exact GPU usage, merged across worker chunks in
    // deterministic chunk order. Ties prefer the lexicographically smaller
    // compact form so results are independent of the thread count.
    auto better = [&set](const PlanScore& cand, const PlanScore& slot) {
        if (cand.plan_idx < 0) return false;
        if (slot.plan_idx < 0) return true;
        if (cand.latency != slot.latency) return cand.latency < slot.latency;
        return set.plans[cand.plan_idx].parts < set.plans[slot.plan_idx].parts;
    };

    const std::size_t num_plans = set.plans.size();
    const int workers = static_cast<int>(std::min<std::size_t>(
        util::max_threads(), std::max<std::size_t>(num_plans / 256, 1)));
    std::vector<std::vector<PlanScore>> chunk_best(
        workers, std::vector<PlanScore>(max_budget + 1));

    auto run_chunk = [&](int wi) {
        SimWorkspace ws;
        std::vector<int> replica_shape;
        auto& best = chunk_best[wi];
        const std::size_t lo = num_plans * wi / workers;
        const std::size_t hi = num_plans * (wi + 1) / workers;
        for (std::size_t pi = lo; pi < hi; ++pi) {
            const CompactPlan& plan = set.plans[pi];
            bool ok = true;
            double capacity = 0.0;
            replica_shape.clear();
            for (auto [s, cnt] : plan.parts) {
                if (!shape_ok[s]) { ok = false; break; }
                capacity += cnt / mean_service[s];
                for (int r = 0; r < cnt; ++r) replica_shape.push_back(s);
            }
            if (!ok || w.arrival_rate >= capacity) continue;  // unstable or infeasible
            PlanScore cand;
            cand.latency =
                simulate_plan_p95(replica_shape, prefill, decode, arrivals, outputs, ws);
            cand.plan_idx = static_cast<int>(pi);
            if (better(cand, best[plan.gpus])) best[plan.gpus] = cand;
        }
    };
    if (workers == 1) {
        run_chunk(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (int wi = 0; wi < workers; ++wi) threads.emplace_back(run_chunk, wi);
        for (auto& t : threads) t.join();
    }

    std::vector<PlanScore> best_at(max_budget + 1);
    for (int g = 0; g <= max_budget; ++g)
        for (int wi = 0; wi < workers; ++wi)
            if (better(chunk_best[wi][g], best_at[g])) best_at[g] = chunk_best[wi][g];

    // Prefix minimum over budgets; ties keep the smaller-budget plan.
    PlanScore running;
    for (int f = 1; f <= max_budget; ++f) {
        const PlanScore& cand = best_at[f];
        if (cand.plan_idx >= 0 && cand.latency < running.latency) running = cand;
        if (running.plan_idx >= 0) {
            out.latency[f] = running.latency;
            ParallelismPlan p;
            const CompactPlan& cp = set.plans[running.plan_idx];
            p.gpus_used = cp.gpus;
            for (auto [s, cnt] : cp.parts)
                for (int r = 0; r < cnt; ++r) p.replicas.push_back(set.shapes[s]);
            out.plan[f] = std::move(p);
        }
    }
    return out;
}

StageLatencyResult stage_p95_latency(int budget, const ModelSpec& model,
                                     const WorkloadStats& w,
                                     const HardwareSpec& hw,
                                     const CostModelParams& params) {
    if (budget < 0)
        throw CascadeError(Errc::invalid_input, "stage_p95_latency requires f >= 0");
    if (w.arrival_rate == 0.0) return {0.0, std::nullopt};
    if (budget == 0) return {};
    StageEvaluator ev(hw, params);
    LatencyRow r = ev.row(model, w, budget);
    return {r.latency[budget], std::move(r.plan[budget])};
}

}  // namespace cascade::costmodel
