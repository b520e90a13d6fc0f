// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the test suites: an H100-like cluster, a three-stage
// cascade of increasing size, and synthetic trace builders.
#pragma once

#include <string>
#include <vector>

#include "cascade/costmodel.hpp"
#include "cascade/domain.hpp"
#include "cascade/util.hpp"

namespace testfix {

inline cascade::HardwareSpec cluster32() {
    cascade::HardwareSpec hw;
    hw.gpu_count = 32;
    hw.flops_per_gpu = 989e12;
    hw.mem_bandwidth_per_gpu = 3.35e12;
    hw.mem_capacity_per_gpu = 80e9;
    hw.intra_node_bw = 400e9;
    hw.inter_node_bw = 200e9;
    hw.gpus_per_node = 8;
    return hw;
}

inline cascade::ModelSpec small7b() {
    cascade::ModelSpec m;
    m.id = "small-7b";
    m.param_count = 7e9;
    m.bytes_per_param = 2;
    m.kv_bytes_per_token = 524288;
    m.stage_index = 1;
    return m;
}

inline cascade::ModelSpec mid70b(int stage = 2) {
    cascade::ModelSpec m;
    m.id = "mid-70b";
    m.param_count = 70e9;
    m.bytes_per_param = 2;
    m.kv_bytes_per_token = 327680;
    m.stage_index = stage;
    return m;
}

inline cascade::ModelSpec large671b(int stage = 3) {
    cascade::ModelSpec m;
    m.id = "large-671b-int4";
    m.param_count = 671e9;
    m.bytes_per_param = 0.5;
    m.kv_bytes_per_token = 70272;
    m.stage_index = stage;
    return m;
}

inline std::vector<cascade::ModelSpec> cascade3() {
    return {small7b(), mid70b(), large671b()};
}

/// Fills the cached min_gpus fields the way the config loader does.
inline std::vector<cascade::ModelSpec> with_min_gpus(
    std::vector<cascade::ModelSpec> models, const cascade::HardwareSpec& hw,
    const cascade::costmodel::CostModelParams& params = {}) {
    for (auto& m : models)
        m.min_gpus = cascade::costmodel::min_gpus_required(m, hw, params);
    return models;
}

/// Poisson arrivals with per-stage scores/output lengths from flat vectors.
/// scores[i] / outputs[i] hold one value per stage, reused for every request
/// unless jitter is requested via the rng-driven builder below.
inline std::vector<cascade::TraceRecord> flat_trace(
    int count, double rate, double input_tokens,
    const std::vector<double>& outputs, const std::vector<double>& scores,
    std::uint64_t seed = 7) {
    cascade::util::Rng rng(seed);
    std::vector<cascade::TraceRecord> trace;
    double t = 0;
    for (int i = 0; i < count; ++i) {
        t += rng.exponential_mean(1.0) / rate;
        cascade::TraceRecord rec;
        rec.arrival_s = t;
        rec.input_tokens = input_tokens;
        for (std::size_t s = 0; s < scores.size(); ++s)
            rec.per_stage.push_back({outputs[s], scores[s]});
        trace.push_back(std::move(rec));
    }
    return trace;
}

/// Random annotated trace: lengths exponential-ish, scores uniform.
inline std::vector<cascade::TraceRecord> random_trace(int count, int stages,
                                                      double rate,
                                                      std::uint64_t seed) {
    cascade::util::Rng rng(seed);
    std::vector<cascade::TraceRecord> trace;
    double t = 0;
    for (int i = 0; i < count; ++i) {
        t += rng.exponential_mean(1.0) / rate;
        cascade::TraceRecord rec;
        rec.arrival_s = t;
        rec.input_tokens = std::round(rng.uniform(1, 512));
        for (int s = 0; s < stages; ++s) {
            cascade::StageRecord sr;
            sr.output_tokens = std::round(rng.uniform(0, 256));
            sr.score = rng.uniform(0, 100);
            rec.per_stage.push_back(sr);
        }
        trace.push_back(std::move(rec));
    }
    return trace;
}

inline std::string temp_dir(const std::string& tag) {
    return std::string("cascade_test_tmp/") + tag;
}

}  // namespace testfix
