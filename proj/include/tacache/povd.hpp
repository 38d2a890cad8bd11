#pragma once

// Parallel-orthogonal velocity decomposition.
//
// The discrete acceleration a_n = (v_{n+1} - v_n) / dt_n is split into a
// component along v_n (rate k_n) and an orthogonal residual r_perp. The
// dimensionless turning score d_n = |r_perp| dt_n / |v_n| summarizes how far
// the direction rotates over one step.

#include "tacache/core.hpp"
#include "tacache/solver.hpp"

#include <vector>

namespace tacache {

struct StepDecomposition {
    Vector accel;
    double k = 0.0;
    Vector r_perp;
    double d = 0.0;
};

inline Vector discrete_accel(const Vector& v_n, const Vector& v_next, double dt) {
    detail::require_same_size(v_n, v_next, "discrete_accel");
    if (!(dt > 0.0)) throw InvalidArgument("discrete_accel: dt must be positive");
    return (v_next - v_n) / dt;
}

/// Throws DegenerateVelocity when |v_n| = 0.
inline StepDecomposition decompose(const Vector& v_n, const Vector& accel, double dt) {
    detail::require_same_size(v_n, accel, "decompose");
    if (!(dt > 0.0)) throw InvalidArgument("decompose: dt must be positive");
    const double vv = v_n.squaredNorm();
    if (!(vv > 0.0)) throw DegenerateVelocity("decompose: zero velocity has no parallel axis");

    StepDecomposition s;
    s.accel = accel;
    s.k = accel.dot(v_n) / vv;
    s.r_perp = accel - s.k * v_n;
    s.d = s.r_perp.norm() * dt / std::sqrt(vv);
    return s;
}

/// One decomposition per consecutive velocity pair of a full-step record
/// (N - 1 entries). Steps with a zero velocity map to k = 0, d = 0, r_perp = 0.
inline std::vector<StepDecomposition> decompose_trajectory(const TrajectoryRecord& rec) {
    for (bool e : rec.evaluated) {
        if (!e) throw InvalidArgument("decompose_trajectory: record contains cached steps; calibration needs a full-step record");
    }
    const int n_steps = rec.steps();
    detail::require(static_cast<int>(rec.velocities.size()) == n_steps, "decompose_trajectory: velocity count mismatch");

    std::vector<StepDecomposition> out;
    out.reserve(n_steps > 0 ? static_cast<std::size_t>(n_steps - 1) : 0);
    for (int n = 0; n + 1 < n_steps; ++n) {
        const auto& v = rec.velocities[static_cast<std::size_t>(n)];
        const auto& v_next = rec.velocities[static_cast<std::size_t>(n) + 1];
        const double dt = rec.grid.dt(n);
        Vector a = discrete_accel(v, v_next, dt);
        try {
            out.push_back(decompose(v, a, dt));
        } catch (const DegenerateVelocity&) {
            out.push_back(StepDecomposition{std::move(a), 0.0, Vector::Zero(v.size()), 0.0});
        }
    }
    return out;
}

} // namespace tacache
