// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace cascade::util {

/// Deterministic RNG with hand-rolled samplers so output streams are stable
/// across standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Exponential with the given mean (mean 0 yields 0 and still consumes
    /// one draw, keeping streams aligned across parameter variations).
    double exponential_mean(double mean) {
        double u = uniform();
        return -mean * std::log1p(-u);
    }

    /// Box-Muller normal; draws two uniforms per call, no cached spare.
    double normal(double mu, double sigma) {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        return mu + sigma * r * std::cos(2.0 * M_PI * u2);
    }

    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi) {
        double u = uniform();
        int span = hi - lo + 1;
        int v = lo + static_cast<int>(u * span);
        return std::min(v, hi);
    }

private:
    std::mt19937_64 eng_;
};

/// Nearest-rank quantile of an ascending-sorted sample: element at
/// ceil(q*n) (1-based). q in (0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Convenience: copies, sorts, applies quantile_sorted.
double quantile(std::vector<double> values, double q);

double mean_of(const std::vector<double>& values);

/// Thread cap: CASCADE_PLANNER_THREADS env var when set, else
/// hardware_concurrency, never below 1.
int max_threads();

/// Runs fn(i) for i in [0, n). Results must be written to disjoint slots;
/// chunking is static so output is independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cascade::util
