// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#include "cascade/outerplan.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "cascade/innerplan.hpp"
#include "cascade/routing.hpp"
#include "cascade/util.hpp"

namespace cascade::outerplan {

using nlohmann::json;

void to_json(json& j, const UtopiaPoint& v) {
    j = json{{"z1_star", v.z1_star}, {"z2_star", v.z2_star}};
}
void from_json(const json& j, UtopiaPoint& v) {
    j.at("z1_star").get_to(v.z1_star);
    j.at("z2_star").get_to(v.z2_star);
}
void to_json(json& j, const WeightPair& v) {
    j = json{{"lambda1", v.lambda1}, {"lambda2", v.lambda2}};
}
void from_json(const json& j, WeightPair& v) {
    j.at("lambda1").get_to(v.lambda1);
    j.at("lambda2").get_to(v.lambda2);
}
void to_json(json& j, const ParetoFront& v) { j = json{{"points", v.points}}; }
void from_json(const json& j, ParetoFront& v) { j.at("points").get_to(v.points); }

void to_json(json& j, const SweepConfig& v) {
    j = json{{"threshold_grid", v.threshold_grid},
             {"weight_ratio_min", v.weight_ratio_min},
             {"weight_ratio_max", v.weight_ratio_max},
             {"weight_count", v.weight_count}};
}
void from_json(const json& j, SweepConfig& v) {
    SweepConfig defaults;
    v.threshold_grid =
        j.value("threshold_grid", std::vector<std::vector<double>>{});
    v.weight_ratio_min = j.value("weight_ratio_min", defaults.weight_ratio_min);
    v.weight_ratio_max = j.value("weight_ratio_max", defaults.weight_ratio_max);
    v.weight_count = j.value("weight_count", defaults.weight_count);
}

void to_json(json& j, const SweepResult& v) {
    j = json{{"front", v.front},
             {"evaluations", v.evaluations},
             {"weights", v.weights},
             {"weight_selection", v.weight_selection},
             {"utopia", v.utopia},
             {"skipped", v.skipped}};
}

double tchebycheff_score(double latency_s, double quality, const UtopiaPoint& z,
                         const WeightPair& w) {
    return std::max(w.lambda1 * (latency_s - z.z1_star),
                    w.lambda2 * (z.z2_star - quality));
}

UtopiaPoint compute_utopia(const std::vector<TraceRecord>& trace,
                           const std::vector<ModelSpec>& models,
                           const HardwareSpec& hw,
                           const costmodel::CostModelParams& params,
                           int total_gpus) {
    if (trace.empty())
        throw CascadeError(Errc::empty_trace, "compute_utopia: empty trace");
    if (models.empty())
        throw CascadeError(Errc::invalid_input, "compute_utopia: no models");
    std::vector<bool> deployed(models.size(), true);
    RoutingThresholds all_accept;
    all_accept.thresholds.assign(models.size() - 1, 0.0);
    auto outcome = routing::route_trace(trace, all_accept, deployed);

    UtopiaPoint z;
    auto first = costmodel::stage_p95_latency(total_gpus, models.front(),
                                              outcome.stage_workloads.front(), hw,
                                              params);
    if (!first.feasible())
        throw CascadeError(Errc::infeasible,
                           "smallest model cannot be served within the budget");
    z.z1_star = first.latency_s;
    z.z2_star = routing::quality_bounds(trace, deployed).q_max;
    return z;
}

ParetoFront pareto_filter(const std::vector<ObjectivePoint>& points) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (points[a].latency_s != points[b].latency_s)
            return points[a].latency_s < points[b].latency_s;
        if (points[a].quality != points[b].quality)
            return points[a].quality > points[b].quality;
        return a < b;
    });
    ParetoFront front;
    double best_quality = -std::numeric_limits<double>::infinity();
    for (std::size_t idx : order) {
        if (points[idx].quality > best_quality) {
            front.points.push_back(points[idx]);
            best_quality = points[idx].quality;
        }
    }
    return front;
}

std::vector<std::vector<double>> default_threshold_grid(
    const std::vector<TraceRecord>& trace, std::size_t stages) {
    if (trace.empty())
        throw CascadeError(Errc::empty_trace, "default_threshold_grid: empty trace");
    std::vector<std::vector<double>> grid;
    for (std::size_t i = 0; i + 1 < stages; ++i) {
        std::vector<double> scores;
        scores.reserve(trace.size());
        for (const auto& rec : trace) scores.push_back(rec.per_stage[i].score);
        std::sort(scores.begin(), scores.end());
        std::vector<double> values{0.0, kThresholdSentinel};
        for (int d = 1; d <= 9; ++d)
            values.push_back(util::quantile_sorted(scores, d / 10.0));
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        grid.push_back(std::move(values));
    }
    return grid;
}

std::vector<WeightPair> weight_ladder(const SweepConfig& cfg) {
    if (cfg.weight_count < 1 || cfg.weight_ratio_min <= 0 ||
        cfg.weight_ratio_max < cfg.weight_ratio_min)
        throw CascadeError(Errc::invalid_input, "invalid weight ladder config");
    std::vector<WeightPair> weights;
    for (int k = 0; k < cfg.weight_count; ++k) {
        double t = cfg.weight_count == 1
                       ? 0.0
                       : static_cast<double>(k) / (cfg.weight_count - 1);
        double ratio = cfg.weight_ratio_min *
                       std::pow(cfg.weight_ratio_max / cfg.weight_ratio_min, t);
        WeightPair w;
        w.lambda1 = ratio / (1.0 + ratio);
        w.lambda2 = 1.0 / (1.0 + ratio);
        weights.push_back(w);
    }
    return weights;
}

namespace {

std::string workload_key(std::size_t stage, const WorkloadStats& w) {
    double fields[5] = {w.arrival_rate, w.mean_input_tokens, w.mean_output_tokens,
                        w.p95_input_tokens, w.p95_output_tokens};
    std::string key(sizeof(std::size_t) + sizeof(fields), '\0');
    std::memcpy(key.data(), &stage, sizeof(stage));
    std::memcpy(key.data() + sizeof(stage), fields, sizeof(fields));
    return key;
}

}  // namespace

SweepResult sweep(const std::vector<TraceRecord>& trace,
                  const std::vector<ModelSpec>& models, const HardwareSpec& hw,
                  const costmodel::CostModelParams& params, int total_gpus,
                  const SweepConfig& cfg) {
    if (trace.empty()) throw CascadeError(Errc::empty_trace, "sweep: empty trace");
    require_valid(models);
    if (overall_arrival_rate(trace) <= 0.0)
        throw CascadeError(Errc::invalid_input,
                           "sweep: trace has no positive arrival-rate span");
    const std::size_t c = models.size();
    for (const auto& rec : trace)
        if (rec.per_stage.size() != c)
            throw CascadeError(Errc::invalid_input,
                               "sweep: trace record stage count != C");

    auto grid = cfg.threshold_grid.empty() ? default_threshold_grid(trace, c)
                                           : cfg.threshold_grid;
    if (grid.size() != c - 1)
        throw CascadeError(Errc::invalid_input,
                           "sweep: threshold grid must have C-1 dimensions");
    for (const auto& dim : grid)
        if (dim.empty())
            throw CascadeError(Errc::invalid_input,
                               "sweep: empty threshold grid dimension");

    costmodel::StageEvaluator evaluator(hw, params);
    std::map<std::string, std::shared_ptr<costmodel::LatencyRow>> row_cache;
    auto stage_row = [&](std::size_t stage,
                         const WorkloadStats& w) -> const costmodel::LatencyRow& {
        auto key = workload_key(stage, w);
        auto it = row_cache.find(key);
        if (it == row_cache.end()) {
            auto row = std::make_shared<costmodel::LatencyRow>(
                evaluator.row(models[stage], w, total_gpus));
            it = row_cache.emplace(std::move(key), std::move(row)).first;
        }
        return *it->second;
    };

    SweepResult result;
    result.utopia = [&] {
        std::vector<bool> deployed(c, true);
        RoutingThresholds all_accept;
        all_accept.thresholds.assign(c - 1, 0.0);
        auto outcome = routing::route_trace(trace, all_accept, deployed);
        const auto& row = stage_row(0, outcome.stage_workloads.front());
        if (std::isinf(row.latency[total_gpus]))
            throw CascadeError(Errc::infeasible,
                               "smallest model cannot be served within the budget");
        UtopiaPoint z;
        z.z1_star = row.latency[total_gpus];
        z.z2_star = routing::quality_bounds(trace, deployed).q_max;
        return z;
    }();

    // Cartesian product over grid dimensions, first dimension outermost.
    std::vector<std::size_t> cursor(grid.size(), 0);
    const std::vector<bool> deployed(c, true);
    bool done = false;
    while (!done) {
        RoutingThresholds h;
        h.thresholds.reserve(grid.size());
        for (std::size_t d = 0; d < grid.size(); ++d)
            h.thresholds.push_back(grid[d][cursor[d]]);

        auto outcome = routing::route_trace(trace, h, deployed);
        std::vector<std::size_t> live;
        for (std::size_t i = 0; i < c; ++i)
            if (outcome.ratios[i] > 0.0) live.push_back(i);

        innerplan::LatencyTable table;
        table.gpu_budget = total_gpus;
        for (std::size_t i : live) {
            const auto& row = stage_row(i, outcome.stage_workloads[i]);
            table.entries.push_back(row.latency);
            table.best_plans.push_back(row.plan);
            // A stage that receives traffic must be deployed.
            table.entries.back()[0] = costmodel::kInfeasible;
            table.best_plans.back()[0] = std::nullopt;
        }

        bool feasible = true;
        innerplan::AllocationSolution sol;
        try {
            sol = innerplan::solve_min_max(table, total_gpus);
        } catch (const CascadeError& e) {
            if (e.code() != Errc::infeasible_problem) throw;
            feasible = false;
        }

        if (feasible) {
            CascadePlan plan;
            plan.allocations.assign(c, 0);
            plan.plans.assign(c, std::nullopt);
            plan.thresholds = h;
            plan.processing_ratios = outcome.ratios;
            for (std::size_t k = 0; k < live.size(); ++k) {
                plan.allocations[live[k]] = sol.allocations[k];
                plan.plans[live[k]] = sol.per_stage_plan[k];
            }
            plan.predicted_max_p95_s = sol.objective_L;
            plan.predicted_quality = outcome.quality;

            ObjectivePoint point;
            point.latency_s = sol.objective_L;
            point.quality = outcome.quality;
            point.thresholds = h;
            point.plan_ref = std::move(plan);
            result.evaluations.push_back(std::move(point));
        } else {
            result.skipped.push_back(h);
        }

        // Advance the cartesian cursor.
        done = true;
        for (std::size_t d = grid.size(); d-- > 0;) {
            if (++cursor[d] < grid[d].size()) {
                done = false;
                break;
            }
            cursor[d] = 0;
        }
        if (grid.empty()) break;  // C = 1: single empty threshold vector
    }

    if (result.evaluations.empty())
        throw CascadeError(Errc::infeasible_problem,
                           "sweep: every threshold candidate is infeasible");

    result.weights = weight_ladder(cfg);
    for (const auto& w : result.weights) {
        int best = -1;
        double best_t = 0.0;
        for (std::size_t i = 0; i < result.evaluations.size(); ++i) {
            const auto& p = result.evaluations[i];
            const double t = tchebycheff_score(p.latency_s, p.quality,
                                               result.utopia, w);
            const bool take =
                best < 0 || t < best_t ||
                (t == best_t &&
                 (p.latency_s < result.evaluations[best].latency_s ||
                  (p.latency_s == result.evaluations[best].latency_s &&
                   p.quality > result.evaluations[best].quality)));
            if (take) {
                best = static_cast<int>(i);
                best_t = t;
            }
        }
        result.weight_selection.push_back(best);
    }

    result.front = pareto_filter(result.evaluations);
    return result;
}

CascadePlan select_plan(const ParetoFront& front, const PlanRequirement& req) {
    if (front.points.empty())
        throw CascadeError(Errc::invalid_input, "select_plan: empty front");
    const bool has_q = req.min_quality.has_value();
    const bool has_l = req.max_latency.has_value();
    if (has_q == has_l)
        throw CascadeError(Errc::invalid_input,
                           "select_plan: exactly one of min_quality/max_latency "
                           "must be set");
    if (has_q) {
        for (const auto& p : front.points)
            if (p.quality >= *req.min_quality) return p.plan_ref;
        throw CascadeError(Errc::no_feasible_point,
                           "no front point meets the quality requirement");
    }
    const ObjectivePoint* best = nullptr;
    for (const auto& p : front.points)
        if (p.latency_s <= *req.max_latency) best = &p;
    if (!best)
        throw CascadeError(Errc::no_feasible_point,
                           "no front point meets the latency requirement");
    return best->plan_ref;
}

std::string front_to_csv(const ParetoFront& front) {
    std::ostringstream out;
    out.precision(17);
    if (front.points.empty()) {
        out << "latency_s,quality\n";
        return out.str();
    }
    const auto& first = front.points.front();
    out << "latency_s,quality";
    for (std::size_t i = 1; i <= first.thresholds.thresholds.size(); ++i)
        out << ",h_" << i;
    for (std::size_t i = 1; i <= first.plan_ref.allocations.size(); ++i)
        out << ",f_" << i;
    out << "\n";
    for (const auto& p : front.points) {
        out << p.latency_s << "," << p.quality;
        for (double h : p.thresholds.thresholds) out << "," << h;
        for (int f : p.plan_ref.allocations) out << "," << f;
        out << "\n";
    }
    return out.str();
}

}  // namespace cascade::outerplan
