#pragma once

// Trajectory-level comparison of a cached run against the full-step run from
// the same noise: state/velocity drift profiles, the cached vs evaluated
// split of velocity drift, and alignment of the historical direction.

#include "tacache/core.hpp"
#include "tacache/csv.hpp"
#include "tacache/povd.hpp"
#include "tacache/solver.hpp"
#include "tacache/tasu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

namespace tacache {

/// Velocities below this norm are excluded from relative velocity drift.
inline constexpr double velocity_drift_floor = 1e-12;

struct CosThetaStats {
    std::vector<double> samples;
    std::vector<int> steps;
    int degenerate = 0;
    double mean = 0.0;
    double positive_fraction = 0.0;
    double p90 = 0.0;
};

struct DriftReport {
    std::vector<double> state_drift;    // N + 1 entries
    std::vector<double> velocity_drift; // N entries, 0 where not measurable
    std::vector<bool> velocity_drift_valid;
    std::vector<int> anchors;
    double skip_ratio = 0.0;
    double final_state_drift = 0.0;
    double cached_velocity_drift = 0.0;
    double evaluated_velocity_drift = 0.0;
    int cached_steps = 0;
    int evaluated_steps = 0;
    CosThetaStats cos_theta;
};

/// Linear-interpolated percentile, q in [0, 1].
inline double percentile(std::vector<double> xs, double q) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] + frac * (xs[hi] - xs[lo]);
}

inline void finalize_cos_stats(CosThetaStats& s) {
    if (s.samples.empty()) return;
    double sum = 0.0;
    int pos = 0;
    for (double c : s.samples) {
        sum += c;
        if (c > 0.0) ++pos;
    }
    const auto n = static_cast<double>(s.samples.size());
    s.mean = sum / n;
    s.positive_fraction = pos / n;
    s.p90 = percentile(s.samples, 0.9);
}

/// Unit orthogonal direction of the full-step record at step n (needs v_{n+1}).
inline std::optional<Vector> oracle_direction(const TrajectoryRecord& full, int n) {
    if (n < 0 || n + 1 >= full.steps()) return std::nullopt;
    const auto& v = full.velocities[static_cast<std::size_t>(n)];
    const auto& v_next = full.velocities[static_cast<std::size_t>(n) + 1];
    if (!(v.squaredNorm() > 0.0)) return std::nullopt;
    const double dt = full.grid.dt(n);
    const auto s = decompose(v, discrete_accel(v, v_next, dt), dt);
    const double rn = s.r_perp.norm();
    if (!(rn > 0.0)) return std::nullopt;
    return Vector(s.r_perp / rn);
}

/// Compares a cached run with the full-step run advanced from the same noise.
///
/// A cached step m (flag false) has its velocity built from direction m - 1
/// of the trace; that direction is scored against the full record's
/// orthogonal direction at m - 1. Degenerate directions are counted, not sampled.
inline DriftReport compare_trajectories(const TrajectoryRecord& full, const TrajectoryRecord& cached,
                                        const SkipTrace* trace = nullptr) {
    if (!(full.grid == cached.grid)) throw InvalidArgument("compare_trajectories: grids differ");
    if (full.states.empty() || cached.states.empty() || full.states.front().size() != cached.states.front().size() ||
        full.states.front() != cached.states.front()) {
        throw InvalidArgument("compare_trajectories: initial states differ");
    }
    const int N = full.steps();
    const auto Nz = static_cast<std::size_t>(N);
    DriftReport r;
    r.state_drift.resize(Nz + 1);
    for (std::size_t i = 0; i <= Nz; ++i) {
        const double ref = full.states[i].norm();
        const double diff = (cached.states[i] - full.states[i]).norm();
        r.state_drift[i] = ref > 0.0 ? diff / ref : diff;
    }
    r.final_state_drift = r.state_drift.back();

    r.velocity_drift.assign(Nz, 0.0);
    r.velocity_drift_valid.assign(Nz, false);
    double cached_sum = 0.0, eval_sum = 0.0;
    for (std::size_t i = 0; i < Nz; ++i) {
        if (cached.evaluated[i]) r.anchors.push_back(static_cast<int>(i));
        const double ref = full.velocities[i].norm();
        if (ref < velocity_drift_floor) continue;
        const double drift = (cached.velocities[i] - full.velocities[i]).norm() / ref;
        r.velocity_drift[i] = drift;
        r.velocity_drift_valid[i] = true;
        if (cached.evaluated[i]) {
            eval_sum += drift;
            ++r.evaluated_steps;
        } else {
            cached_sum += drift;
            ++r.cached_steps;
        }
    }
    r.cached_velocity_drift = r.cached_steps ? cached_sum / r.cached_steps : 0.0;
    r.evaluated_velocity_drift = r.evaluated_steps ? eval_sum / r.evaluated_steps : 0.0;
    r.skip_ratio = 1.0 - static_cast<double>(r.anchors.size()) / static_cast<double>(N);

    if (trace && trace->directions.size() == Nz) {
        for (int m = 1; m < N; ++m) {
            if (cached.evaluated[static_cast<std::size_t>(m)]) continue;
            const auto& u_hat = trace->directions[static_cast<std::size_t>(m) - 1];
            const auto u = oracle_direction(full, m - 1);
            if (!u_hat || !u) {
                ++r.cos_theta.degenerate;
                continue;
            }
            r.cos_theta.samples.push_back(std::clamp(u_hat->dot(*u), -1.0, 1.0));
            r.cos_theta.steps.push_back(m);
        }
        finalize_cos_stats(r.cos_theta);
    }
    return r;
}

/// NFE ratio full / cached: the oracle-call proxy for wall-clock speedup.
inline double count_speedup(std::uint64_t full_nfe, std::uint64_t cached_nfe) {
    if (cached_nfe == 0) throw InvalidArgument("count_speedup: cached nfe must be >= 1");
    return static_cast<double>(full_nfe) / static_cast<double>(cached_nfe);
}

/// Rows: n, t_n, state_drift, vel_drift, is_anchor.
inline void write_drift_profile_csv(std::ostream& os, const TimeGrid& grid, const DriftReport& r) {
    CsvWriter w(os);
    w << "n" << "t" << "state_drift" << "vel_drift" << "is_anchor";
    w.end_row();
    const int N = grid.steps();
    std::vector<bool> anchor(static_cast<std::size_t>(N), false);
    for (int a : r.anchors) anchor[static_cast<std::size_t>(a)] = true;
    for (int n = 0; n <= N; ++n) {
        const auto i = static_cast<std::size_t>(n);
        w << n << grid.time(n) << r.state_drift[i];
        if (n < N) {
            w << r.velocity_drift[i] << (anchor[i] ? 1 : 0);
        } else {
            w << "" << "";
        }
        w.end_row();
    }
}

} // namespace tacache
