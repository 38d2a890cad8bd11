#pragma once

// Trajectory-aware skip update: the cached sampler.
//
// Inside a skip interval opened at step n the velocity is rebuilt without
// oracle calls:
//
//   v_hat_{n+j+1} = exp(k_tilde_{n+j} dt_{n+j}) v_hat_{n+j} + d_tilde_{n+j} |v_hat_{n+j}| u_hat_{n+j}
//
// where u_hat is the interval's historical turning direction re-orthogonalized
// against the current reconstruction.

#include "tacache/calibrate.hpp"
#include "tacache/core.hpp"
#include "tacache/field.hpp"
#include "tacache/solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace tacache {

/// Component switches. use_mi = false forces k_tilde = 0 in the update,
/// use_di = false forces d_tilde = 0. Both off leaves only the skip schedule.
struct CompensationToggles {
    bool use_mi = true;
    bool use_di = true;

    friend bool operator==(const CompensationToggles&, const CompensationToggles&) = default;
};

/// Relative residual below which an anchor counts as parallel to v_hat.
inline constexpr double degenerate_direction_eps = 1e-12;

/// Turning direction of the last evaluated increment: the part of
/// (v_curr - v_prev) orthogonal to v_prev.
inline Vector init_direction(const Vector& v_prev, const Vector& v_curr) {
    detail::require_same_size(v_prev, v_curr, "init_direction");
    const double pp = v_prev.squaredNorm();
    if (!(pp > 0.0)) throw DegenerateVelocity("init_direction: zero reference velocity");
    const Vector dv = v_curr - v_prev;
    return dv - (dv.dot(v_prev) / pp) * v_prev;
}

/// Unit vector along `anchor` with its v_hat component removed, or nullopt
/// when the anchor is (numerically) parallel to v_hat.
inline std::optional<Vector> reorth(const Vector& anchor, const Vector& v_hat) {
    detail::require_same_size(anchor, v_hat, "reorth");
    const double vv = v_hat.squaredNorm();
    if (!(vv > 0.0)) throw DegenerateVelocity("reorth: zero reconstructed velocity");
    const double anchor_norm = anchor.norm();
    if (!(anchor_norm > 0.0)) return std::nullopt;

    Vector r = anchor - (anchor.dot(v_hat) / vv) * v_hat;
    const double rn = r.norm();
    if (!(rn >= degenerate_direction_eps * anchor_norm)) return std::nullopt;
    // Second projection pass removes the cancellation error of the first.
    r -= (r.dot(v_hat) / vv) * v_hat;
    return r / r.norm();
}

/// One recursive reconstruction step. A missing direction zeroes the directional term.
inline Vector tasu_step(const Vector& v_hat, const std::optional<Vector>& u_perp, double k_t, double d_t, double dt,
                        CompensationToggles toggles) {
    if (!(dt > 0.0)) throw InvalidArgument("tasu_step: dt must be positive");
    detail::require_finite(v_hat, "tasu_step");
    detail::require_finite(k_t, "tasu_step");
    detail::require_finite(d_t, "tasu_step");
    const double k_eff = toggles.use_mi ? k_t : 0.0;
    Vector next = std::exp(k_eff * dt) * v_hat;
    if (toggles.use_di && u_perp) {
        detail::require_same_size(v_hat, *u_perp, "tasu_step");
        next += (d_t * v_hat.norm()) * *u_perp;
    }
    detail::require_finite(next, "tasu_step");
    return next;
}

/// Side output of a cached run for diagnostics.
struct SkipTrace {
    /// directions[m] is the re-orthogonalized direction used to build
    /// v_hat_{m+1}; empty outside skip intervals or when degenerate.
    std::vector<std::optional<Vector>> directions;
    /// Steps that opened a skip interval (h > 1).
    std::vector<int> interval_starts;
    /// Count of interval steps whose direction was degenerate.
    int degenerate_directions = 0;
};

/// Cached sampling driven by a precomputed schedule.
///
/// Step 0 and every step with effective h = 1 are standard evaluate + Euler
/// steps. A step with h > 1 is evaluated once (the anchor), then the next h
/// Euler steps consume reconstructed velocities. Indicator entries are read
/// by absolute step index; schedule entries inside an interval are skipped.
inline TrajectoryRecord sample_cached(const VelocityField& field, const ScheduleBundle& bundle, const Vector& x0,
                                      const Condition& c, CompensationToggles toggles = {},
                                      SkipTrace* trace = nullptr) {
    const TimeGrid& grid = bundle.grid;
    const int N = grid.steps();
    const auto Nz = static_cast<std::size_t>(N);
    if (bundle.schedule.size() != Nz || bundle.indicators.k_tilde.size() != Nz ||
        bundle.indicators.d_tilde.size() != Nz) {
        throw InvalidArgument("sample_cached: bundle does not match its grid");
    }
    if (x0.size() != field.dimension()) throw InvalidArgument("sample_cached: x0 dimension mismatch");

    TrajectoryRecord rec;
    rec.grid = grid;
    rec.states.assign(Nz + 1, Vector());
    rec.velocities.assign(Nz, Vector());
    rec.evaluated.assign(Nz, false);
    rec.states[0] = x0;
    if (trace) {
        trace->directions.assign(Nz, std::nullopt);
        trace->interval_starts.clear();
        trace->degenerate_directions = 0;
    }

    std::optional<Vector> last_evaluated;
    int n = 0;
    while (n < N) {
        const auto i = static_cast<std::size_t>(n);
        const int h = std::min(bundle.schedule[i], N - n);
        if (h < 1) throw InvalidArgument("sample_cached: schedule entry out of range");

        Vector v = field.evaluate(rec.states[i], grid.time(n), c);
        rec.evaluated[i] = true;
        ++rec.nfe;

        if (h == 1 || n == 0) {
            rec.velocities[i] = v;
            rec.states[i + 1] = euler_step(rec.states[i], v, grid.dt(n));
            last_evaluated = std::move(v);
            n += 1;
            continue;
        }

        if (trace) trace->interval_starts.push_back(n);
        std::optional<Vector> anchor;
        if (last_evaluated && last_evaluated->squaredNorm() > 0.0) anchor = init_direction(*last_evaluated, v);

        Vector v_hat = v;
        for (int j = 0; j < h; ++j) {
            const int m = n + j;
            const auto mi = static_cast<std::size_t>(m);
            rec.velocities[mi] = v_hat;
            rec.states[mi + 1] = euler_step(rec.states[mi], v_hat, grid.dt(m));

            std::optional<Vector> u;
            if (anchor && v_hat.squaredNorm() > 0.0) u = reorth(*anchor, v_hat);
            if (!u && trace) ++trace->degenerate_directions;
            v_hat = tasu_step(v_hat, u, bundle.indicators.k_tilde[mi], bundle.indicators.d_tilde[mi], grid.dt(m),
                              toggles);
            if (trace) trace->directions[mi] = std::move(u);
        }
        last_evaluated = std::move(v);
        n += h;
    }
    return rec;
}

} // namespace tacache
