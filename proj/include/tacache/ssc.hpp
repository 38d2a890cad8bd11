#pragma once

// Stable step calculator: turns per-step variation sequences into the
// longest admissible skip interval at every step.

#include "tacache/core.hpp"
#include "tacache/indicators.hpp"
#include "tacache/solver.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace tacache {

inline constexpr int default_h_max = 12;

/// Threshold presets (tau_k, tau_d).
struct ThresholdPreset {
    double tau_k;
    double tau_d;
};
inline constexpr ThresholdPreset preset_aggressive{0.06, 0.6};
inline constexpr ThresholdPreset preset_moderate{0.04, 0.4};
inline constexpr ThresholdPreset preset_conservative{0.03, 0.3};

/// Largest h in {1, ..., min(h_max, N - n)} with h == 1 or sum_{j<h} z[n + j] <= tau.
inline int ssc_single(std::span<const double> z, int n, double tau, int h_max) {
    const int N = static_cast<int>(z.size());
    if (n < 0 || n >= N) throw InvalidArgument("ssc_single: step index " + std::to_string(n) + " out of range");
    if (!(tau >= 0.0)) throw InvalidArgument("ssc_single: tau must be non-negative");
    if (h_max < 1) throw InvalidArgument("ssc_single: h_max must be >= 1");

    const int cap = std::min(h_max, N - n);
    int best = 1;
    double acc = 0.0;
    for (int h = 1; h <= cap; ++h) {
        acc += z[static_cast<std::size_t>(n + h - 1)];
        // The sequence is non-negative, so once the prefix exceeds tau it never recovers.
        if (acc > tau) break;
        best = h;
    }
    return best;
}

/// Magnitude sequence K_m = |k_tilde_m| * dt_m.
inline std::vector<double> magnitude_sequence(const IndicatorTable& ind, const TimeGrid& grid) {
    std::vector<double> K(ind.k_tilde.size());
    for (std::size_t m = 0; m < K.size(); ++m) K[m] = std::abs(ind.k_tilde[m]) * grid.dt(static_cast<int>(m));
    return K;
}

/// h_n = min(SSC(K, n, tau_k), SSC(D, n, tau_d)) for every step.
inline std::vector<int> build_schedule(const IndicatorTable& ind, const TimeGrid& grid, double tau_k, double tau_d,
                                       int h_max) {
    if (!(tau_k >= 0.0) || !(tau_d >= 0.0)) throw InvalidArgument("build_schedule: thresholds must be non-negative");
    const auto N = static_cast<std::size_t>(grid.steps());
    if (ind.k_tilde.size() != N || ind.d_tilde.size() != N) {
        throw InvalidArgument("build_schedule: indicator length does not match grid step count");
    }
    for (double d : ind.d_tilde) {
        if (!(d >= 0.0)) throw InvalidArgument("build_schedule: direction indicator must be non-negative");
    }
    const auto K = magnitude_sequence(ind, grid);
    std::vector<int> h(N);
    for (std::size_t n = 0; n < N; ++n) {
        const int i = static_cast<int>(n);
        h[n] = std::min(ssc_single(K, i, tau_k, h_max), ssc_single(ind.d_tilde, i, tau_d, h_max));
    }
    return h;
}

struct ScheduleCoverage {
    double skip_ratio = 0.0;
    std::vector<int> anchors;
};

/// Walks the inference loop's interval traversal: step 0 and every h = 1 step
/// are evaluated, an h > 1 step opens an interval with one anchor evaluation.
inline ScheduleCoverage schedule_coverage(std::span<const int> schedule, int n_steps) {
    detail::require(n_steps >= 1 && static_cast<int>(schedule.size()) == n_steps,
                    "schedule_coverage: schedule length does not match step count");
    ScheduleCoverage cov;
    int n = 0;
    while (n < n_steps) {
        const int h = std::min(schedule[static_cast<std::size_t>(n)], n_steps - n);
        detail::require(h >= 1, "schedule_coverage: schedule entry out of range");
        cov.anchors.push_back(n);
        n += (h == 1 || n == 0) ? 1 : h;
    }
    cov.skip_ratio = 1.0 - static_cast<double>(cov.anchors.size()) / static_cast<double>(n_steps);
    return cov;
}

} // namespace tacache
