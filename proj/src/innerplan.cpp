// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#include "cascade/innerplan.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace cascade::innerplan {

using nlohmann::json;

void to_json(json& j, const LatencyTable& v) {
    json entries = json::array();
    for (const auto& row : v.entries) {
        json jrow = json::array();
        for (double cell : row) {
            if (std::isinf(cell)) jrow.push_back(nullptr);
            else jrow.push_back(cell);
        }
        entries.push_back(std::move(jrow));
    }
    json plans = json::array();
    for (const auto& row : v.best_plans) {
        json jrow = json::array();
        for (const auto& p : row) {
            if (p) jrow.push_back(*p);
            else jrow.push_back(nullptr);
        }
        plans.push_back(std::move(jrow));
    }
    j = json{{"gpu_budget", v.gpu_budget},
             {"entries", std::move(entries)},
             {"best_plans", std::move(plans)}};
}

void from_json(const json& j, LatencyTable& v) {
    j.at("gpu_budget").get_to(v.gpu_budget);
    v.entries.clear();
    for (const auto& jrow : j.at("entries")) {
        std::vector<double> row;
        for (const auto& cell : jrow)
            row.push_back(cell.is_null() ? kInfeasible : cell.get<double>());
        v.entries.push_back(std::move(row));
    }
    v.best_plans.clear();
    for (const auto& jrow : j.at("best_plans")) {
        std::vector<std::optional<ParallelismPlan>> row;
        for (const auto& cell : jrow) {
            if (cell.is_null()) row.push_back(std::nullopt);
            else row.push_back(cell.get<ParallelismPlan>());
        }
        v.best_plans.push_back(std::move(row));
    }
}

void validate_table(const LatencyTable& table) {
    const int n = table.gpu_budget;
    if (n < 0)
        throw CascadeError(Errc::invalid_input, "latency table: negative budget");
    if (table.entries.empty())
        throw CascadeError(Errc::invalid_input, "latency table: no stages");
    if (table.best_plans.size() != table.entries.size())
        throw CascadeError(Errc::invalid_input,
                           "latency table: best_plans/entries stage mismatch");
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        const auto& row = table.entries[i];
        if (row.size() != static_cast<std::size_t>(n) + 1 ||
            table.best_plans[i].size() != row.size())
            throw CascadeError(Errc::invalid_input,
                               "latency table: row length != N+1");
        bool seen_feasible = false;
        double prev = kInfeasible;
        for (int f = 0; f <= n; ++f) {
            const double cell = row[f];
            if (std::isinf(cell)) {
                if (seen_feasible && f > 0)
                    throw CascadeError(Errc::invalid_input,
                                       "latency table: feasibility not upward-closed");
                continue;
            }
            if (cell < 0.0)
                throw CascadeError(Errc::invalid_input,
                                   "latency table: negative latency");
            if (seen_feasible && cell > prev)
                throw CascadeError(Errc::invalid_input,
                                   "latency table: row not non-increasing");
            seen_feasible = true;
            prev = cell;
        }
    }
}

LatencyTable build_latency_table(costmodel::StageEvaluator& evaluator,
                                 const std::vector<WorkloadStats>& workloads,
                                 const std::vector<ModelSpec>& models, int budget) {
    if (workloads.size() != models.size())
        throw CascadeError(Errc::invalid_input,
                           "build_latency_table: workloads length != C");
    LatencyTable table;
    table.gpu_budget = budget;
    for (std::size_t i = 0; i < models.size(); ++i) {
        costmodel::LatencyRow row = evaluator.row(models[i], workloads[i], budget);
        table.entries.push_back(std::move(row.latency));
        table.best_plans.push_back(std::move(row.plan));
    }
    return table;
}

LatencyTable build_latency_table(const std::vector<WorkloadStats>& workloads,
                                 const std::vector<ModelSpec>& models,
                                 const HardwareSpec& hw,
                                 const costmodel::CostModelParams& params) {
    costmodel::StageEvaluator evaluator(hw, params);
    return build_latency_table(evaluator, workloads, models, hw.gpu_count);
}

namespace {

/// Smallest feasible f with l_i(f) <= limit, or -1. Rows are non-increasing
/// over the upward-closed feasible region, so the answer is the first such f.
int min_budget_within(const std::vector<double>& row, double limit) {
    for (int f = 0; f < static_cast<int>(row.size()); ++f)
        if (!std::isinf(row[f]) && row[f] <= limit) return f;
    return -1;
}

}  // namespace

AllocationSolution solve_min_max(const LatencyTable& table, int total_gpus) {
    validate_table(table);
    const int c = table.stages();
    if (total_gpus < 0 || total_gpus > table.gpu_budget)
        throw CascadeError(Errc::invalid_input,
                           "solve_min_max: budget outside table range");

    // Candidate objective values: the distinct finite cell latencies.
    std::vector<double> candidates;
    for (const auto& row : table.entries)
        for (int f = 0; f <= total_gpus; ++f)
            if (!std::isinf(row[f])) candidates.push_back(row[f]);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());

    auto feasible = [&](double limit) {
        long long need = 0;
        for (int i = 0; i < c; ++i) {
            int t = min_budget_within(table.entries[i], limit);
            if (t < 0) return false;
            need += t;
        }
        return need <= total_gpus;
    };

    // Binary search for the smallest achievable maximum latency.
    int lo = 0, hi = static_cast<int>(candidates.size()) - 1, found = -1;
    while (lo <= hi) {
        int mid = lo + (hi - lo) / 2;
        if (feasible(candidates[mid])) {
            found = mid;
            hi = mid - 1;
        } else {
            lo = mid + 1;
        }
    }
    if (found < 0)
        throw CascadeError(Errc::infeasible_problem,
                           "no allocation satisfies the GPU budget");
    const double objective = candidates[found];

    // Lexicographically smallest optimal allocation: each stage takes its
    // minimum budget, the last stage absorbs the slack (harmless by row
    // monotonicity).
    AllocationSolution sol;
    sol.allocations.resize(c);
    int used = 0;
    for (int i = 0; i < c; ++i) {
        int t = min_budget_within(table.entries[i], objective);
        sol.allocations[i] = t;
        used += t;
    }
    sol.allocations[c - 1] += total_gpus - used;

    sol.objective_L = 0.0;
    for (int i = 0; i < c; ++i) {
        const int f = sol.allocations[i];
        sol.per_stage_latency.push_back(table.entries[i][f]);
        sol.per_stage_plan.push_back(table.best_plans[i][f]);
        sol.objective_L = std::max(sol.objective_L, table.entries[i][f]);
    }
    return sol;
}

std::string export_milp(const LatencyTable& table, int total_gpus) {
    validate_table(table);
    const int c = table.stages();
    std::ostringstream lp;
    lp.precision(17);

    auto var = [](int i, int f) {
        return "x_" + std::to_string(i + 1) + "_" + std::to_string(f);
    };

    lp << "\\ min-max latency assignment, " << c << " stages, " << total_gpus
       << " GPUs\n";
    lp << "Minimize\n obj: L\nSubject To\n";

    for (int i = 0; i < c; ++i) {
        lp << " assign_" << (i + 1) << ":";
        bool first = true;
        for (int f = 0; f <= total_gpus; ++f) {
            if (std::isinf(table.entries[i][f])) continue;
            lp << (first ? " " : " + ") << var(i, f);
            first = false;
        }
        lp << " = 1\n";
    }

    lp << " budget:";
    {
        bool first = true;
        for (int i = 0; i < c; ++i)
            for (int f = 1; f <= total_gpus; ++f) {
                if (std::isinf(table.entries[i][f])) continue;
                lp << (first ? " " : " + ") << f << " " << var(i, f);
                first = false;
            }
        if (first) lp << " 0 L";
        lp << " = " << total_gpus << "\n";
    }

    for (int i = 0; i < c; ++i) {
        lp << " maxlat_" << (i + 1) << ": L";
        for (int f = 0; f <= total_gpus; ++f) {
            const double cell = table.entries[i][f];
            if (std::isinf(cell) || cell == 0.0) continue;
            lp << " - " << cell << " " << var(i, f);
        }
        lp << " >= 0\n";
    }

    lp << "Bounds\n L >= 0\nBinaries\n";
    for (int i = 0; i < c; ++i)
        for (int f = 0; f <= total_gpus; ++f)
            if (!std::isinf(table.entries[i][f])) lp << " " << var(i, f) << "\n";
    lp << "End\n";
    return lp.str();
}

}  // namespace cascade::innerplan
